#include <gtest/gtest.h>

#include <numeric>

#include "openlock/planner.hpp"
#include "support/generators.hpp"

using namespace openlock;

namespace {

const TrialConfig kCC3{SchemaKind::CC3, {Position::Upper, Position::Left, Position::Lower}, "cc3"};
const TrialConfig kCE3{SchemaKind::CE3, {Position::UpperLeft, Position::LowerRight, Position::Lower}, "ce3"};

constexpr int kPos = static_cast<int>(BetaDimension::Position);
constexpr int kColor = static_cast<int>(BetaDimension::Color);
constexpr int kAct = static_cast<int>(BetaDimension::Action);

LikelihoodParams uniform_params() { return mean_parameters(begin_trial(BetaTheory{})); }

SubchainMass mass(Action a, double m, int index = 0) { return {make_subchain(a, kCC3, index), m}; }

ActionMask all_allowed() {
  ActionMask m;
  m.fill(true);
  return m;
}

struct Recorder : AgentObserver {
  const Agent* agent = nullptr;
  int decisions = 0;
  int violations = 0;
  std::vector<AttemptLog> attempts;
  std::vector<TrialResult> trials;

  void on_decision(const DecisionView& d) override {
    ++decisions;
    double z = 0.0;
    for (double p : d.atomic) z += p;
    if (std::abs(z - 1.0) > 1e-9) ++violations;
    if (d.fallback) return;
    const auto goal = goal_actions(agent->chains());
    if (!d.actions.support[d.chosen.index()] || !goal[d.chosen.index()]) ++violations;
    for (int a = 0; a < kNumActions; ++a) {
      if (d.actions.support[a] && !goal[a]) ++violations;
    }
  }
  void on_attempt(const AttemptLog& log) override { attempts.push_back(log); }
  void on_trial(const TrialResult& r) override { trials.push_back(r); }
};

}  // namespace

TEST(SubchainPosterior, WeightsStructureByLikelihood) {
  auto p = uniform_params();
  p.theta[kAct][Action::push(Position::Upper).index()] *= 3.0;
  const std::vector<SubchainMass> structural{mass(Action::push(Position::Upper), 0.5),
                                             mass(Action::push(Position::Left), 0.5)};
  const auto post = subchain_posterior(p, structural);
  ASSERT_EQ(post.size(), 2u);
  EXPECT_NEAR(post[0].mass, 0.75, 1e-12);
  EXPECT_NEAR(post[1].mass, 0.25, 1e-12);
  EXPECT_TRUE(subchain_posterior(p, {}).empty());
}

TEST(SubchainPosterior, InvariantToLikelihoodScale) {
  gen::Rng rng(67);
  for (int i = 0; i < 100; ++i) {
    LikelihoodParams p;
    p.theta[kPos] = gen::sample(rng, kNumLevers, 0.01, 1.0);
    p.theta[kColor] = gen::sample(rng, 2, 0.01, 1.0);
    p.theta[kAct] = gen::sample(rng, kNumActions, 0.01, 1.0);
    std::vector<SubchainMass> structural;
    for (int a = 0; a < kNumActions; ++a) {
      structural.push_back(mass(Action::from_index(a), std::uniform_real_distribution<double>(0.0, 1.0)(rng)));
    }
    auto scaled = p;
    const double c = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    for (auto& v : scaled.theta[kAct]) v *= c;
    const auto a = subchain_posterior(p, structural);
    const auto b = subchain_posterior(scaled, structural);
    double z = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_NEAR(a[k].mass, b[k].mass, 1e-12);
      z += a[k].mass;
    }
    EXPECT_NEAR(z, 1.0, 1e-12);
  }
}

TEST(ActionPosterior, GroupsAndMasks) {
  const std::vector<SubchainMass> post{mass(Action::push(Position::Upper), 0.2),
                                       mass(Action::push(Position::Upper), 0.3, 1),
                                       mass(Action::pull(Position::Left), 0.5)};
  const auto all = action_posterior(post, all_allowed());
  EXPECT_NEAR(all[Action::push(Position::Upper)], 0.5, 1e-12);
  EXPECT_NEAR(all[Action::pull(Position::Left)], 0.5, 1e-12);
  ActionMask only_upper{};
  only_upper[Action::push(Position::Upper).index()] = true;
  const auto masked = action_posterior(post, only_upper);
  EXPECT_NEAR(masked[Action::push(Position::Upper)], 1.0, 1e-12);
  EXPECT_FALSE(masked.support[Action::pull(Position::Left).index()]);
  EXPECT_TRUE(action_posterior(post, ActionMask{}).empty());
}

TEST(GoalActions, ExcludeActionsOutsideAliveChains) {
  ChainSpace chains(kCC3);
  auto mask = goal_actions(chains);
  EXPECT_EQ(std::count(mask.begin(), mask.end(), true), kNumActions);
  // Prune every chain that uses PUSH UPPER_RIGHT in either slot.
  const Action a = Action::push(Position::UpperRight);
  chains.prune_prefix(ActionSequence{a});
  for (Action b : all_actions()) {
    if (!b.is_door()) chains.prune_prefix(ActionSequence{b, a});
  }
  mask = goal_actions(chains);
  EXPECT_FALSE(mask[a.index()]);
  EXPECT_TRUE(mask[Action::push_door().index()]);
}

TEST(SelectIntervention, PicksArgmax) {
  ActionPosterior p;
  p.p[3] = 0.2;
  p.p[5] = 0.7;
  p.p[14] = 0.1;
  p.support[3] = p.support[5] = p.support[14] = true;
  gen::Rng rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(select_intervention(p, rng).index(), 5);
  EXPECT_THROW(select_intervention(ActionPosterior{}, rng), std::invalid_argument);
}

TEST(SelectIntervention, BreaksTiesUniformly) {
  ActionPosterior p;
  p.p[2] = p.p[9] = 0.4;
  p.p[4] = 0.2;
  p.support[2] = p.support[9] = p.support[4] = true;
  gen::Rng rng(71);
  int first = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const int a = select_intervention(p, rng).index();
    ASSERT_TRUE(a == 2 || a == 9);
    first += a == 2 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 0.05);
}

TEST(ArgmaxSet, RelativeTolerance) {
  const std::array<double, 3> s{1.0, 1.0 - 1e-14, 0.9};
  const std::array<bool, 3> m{true, true, true};
  EXPECT_EQ(argmax_set(s, m), (std::vector<int>{0, 1}));
  const std::array<bool, 3> m2{false, false, true};
  EXPECT_EQ(argmax_set(s, m2), (std::vector<int>{2}));
  EXPECT_TRUE(argmax_set(s, std::array<bool, 3>{}).empty());
}

TEST(BindingWeights, DoorIsZeroAndLeversFollowLikelihood) {
  const auto p = uniform_params();
  const auto w = binding_weights(p, kCC3);
  EXPECT_DOUBLE_EQ(w[kNumActions - 1], 0.0);
  for (int a = 0; a + 1 < kNumActions; ++a) EXPECT_NEAR(w[a], w[0], 1e-15);
}

// A chain holding all structural mass is executed action by action and opens
// the door.
TEST(Planner, ForcedChainExecutesItsSolution) {
  const ChainSpace chains(kCC3);
  const auto solution = solution_oracle(kCC3)[1];
  std::vector<double> probs(chains.size(), 0.0);
  probs[chains.id_of(solution)] = 1.0;
  EnvState s = new_trial(kCC3, 30);
  gen::Rng rng(2);
  ActionSequence tau;
  bool opened = false;
  for (int i = 0; i < 3; ++i) {
    const auto structural = subchain_belief(chains, probs, tau);
    const auto post = action_posterior(subchain_posterior(uniform_params(), structural), goal_actions(chains));
    const Action a = select_intervention(post, rng);
    EXPECT_EQ(a, solution[i]);
    auto r = step(s, a);
    opened = opened || r.door_opened;
    s = r.state;
    tau.push_back(a);
  }
  EXPECT_TRUE(opened);
}

TEST(Agent, DeterministicForSeed) {
  auto run = [](std::uint64_t seed, LikelihoodMode mode) {
    Agent agent(seed, AgentOptions{mode});
    Recorder rec;
    rec.agent = &agent;
    for (const auto& t : standard_trial_sequence(SequenceKind::Training3, SchemaKind::CE3, 3)) agent.run_trial(t, 30, &rec);
    std::vector<ActionSequence> actions;
    for (const auto& a : rec.attempts) actions.push_back(a.actions);
    return actions;
  };
  EXPECT_EQ(run(5, LikelihoodMode::Sample), run(5, LikelihoodMode::Sample));
  EXPECT_EQ(run(5, LikelihoodMode::Mean), run(5, LikelihoodMode::Mean));
  EXPECT_NE(run(5, LikelihoodMode::Sample), run(6, LikelihoodMode::Sample));
}

TEST(Agent, ProtocolErrors) {
  Agent agent(1);
  EXPECT_FALSE(agent.in_trial());
  EXPECT_THROW(agent.run_attempt(), ProtocolError);
  EXPECT_THROW(agent.finish_trial(), ProtocolError);
  agent.begin_trial(kCC3, 1);
  EXPECT_TRUE(agent.in_trial());
  agent.run_attempt();
  EXPECT_TRUE(agent.env().trial_over());
  EXPECT_THROW(agent.run_attempt(), ProtocolError);
}

TEST(Agent, OneAtomicUpdatePerTrial) {
  Agent agent(9, AgentOptions{LikelihoodMode::Mean});
  for (const auto& t : standard_trial_sequence(SequenceKind::Training3, SchemaKind::CC3, 0)) {
    const auto before = agent.gamma().concentration;
    const auto r = agent.run_trial(t, 30);
    EXPECT_TRUE(r.completed);
    EXPECT_EQ(r.atomic_updates, 1);
    const auto inc = atomic_increments(agent.gamma(), solution_structure(solution_oracle(t)));
    for (std::size_t m = 0; m < inc.size(); ++m) EXPECT_NEAR(agent.gamma().concentration[m], before[m] + inc[m], 1e-12);
  }
}

TEST(Agent, NoSolutionMeansNoAtomicUpdate) {
  Agent agent(4);
  const auto before = agent.gamma().concentration;
  const auto r = agent.run_trial(kCE3, 1);
  if (r.solutions_found == 0) {
    EXPECT_EQ(r.atomic_updates, 0);
    EXPECT_EQ(agent.gamma().concentration, before);
  } else {
    EXPECT_EQ(r.atomic_updates, 1);
  }
}

// Properties over full agent runs: chosen actions lie in the goal-action set,
// beliefs stay normalized, failed decisions prune, the trial log is consistent.
TEST(AgentProperty, DecisionsRespectGoalActionsAndPruning) {
  gen::Rng rng(73);
  for (int run = 0; run < 12; ++run) {
    const auto mode = run % 2 ? LikelihoodMode::Mean : LikelihoodMode::Sample;
    const auto weighting = run % 3 ? InstantiationWeighting::Associative : InstantiationWeighting::Uniform;
    Agent agent(rng(), AgentOptions{mode, 1.0, weighting});
    Recorder rec;
    rec.agent = &agent;
    for (int t = 0; t < 3; ++t) {
      const auto cfg = gen::trial(rng, rng() % 2 ? SchemaKind::CC3 : SchemaKind::CE3);
      const auto r = agent.run_trial(cfg, 30, &rec);
      EXPECT_LE(r.attempts_used, 30);
      EXPECT_EQ(r.completed, r.solutions_found == 2);
    }
    EXPECT_EQ(rec.violations, 0);
    EXPECT_EQ(rec.trials.size(), 3u);
    for (const auto& log : rec.attempts) {
      ASSERT_EQ(log.actions.size(), 3u);
      ASSERT_EQ(log.posterior_top3.size(), 3u);
      bool should_prune = false;
      for (std::size_t i = 0; i < 3; ++i) {
        if (log.events[i].empty() && !log.posterior_top3[i].empty()) should_prune = true;
      }
      if (should_prune) {
        EXPECT_GT(log.pruned_count, 0);
      }
      if (log.pruned_count == 0) {
        for (const auto& e : log.events) {
          if (e.empty()) {
            EXPECT_GT(log.fallback_count, 0);
          }
        }
      }
    }
  }
}

TEST(AgentProperty, TrialsFinishWithinBudgetAndImprove) {
  // Mean attempts on the sixth CE3 room are below the first, over 10 agents.
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    Agent agent(1000 + i, AgentOptions{LikelihoodMode::Mean});
    const auto trials = standard_trial_sequence(SequenceKind::Training3, SchemaKind::CE3, 1000 + i);
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const auto r = agent.run_trial(trials[t], 30);
      if (t == 0) first += r.attempts_used;
      if (t + 1 == trials.size()) last += r.attempts_used;
    }
  }
  EXPECT_LT(last, first);
}
