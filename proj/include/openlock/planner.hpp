#pragma once

// Intervention selection. The structural subchain belief is weighted by the
// associative likelihood, marginalized to actions, restricted to actions that
// appear in goal chains, and the argmax is executed. Agent runs the
// decide -> act -> observe loop over attempts and trials.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "openlock/env.hpp"
#include "openlock/hypothesis.hpp"
#include "openlock/instance_learner.hpp"
#include "openlock/structure_learner.hpp"

namespace openlock {

using Rng = std::mt19937_64;

// p(c_i | rho_i, do(tau, q)) proportional to p(rho_i | c_i; beta) p(c_i | do(tau, q); gamma).
inline std::vector<SubchainMass> subchain_posterior(const LikelihoodParams& params,
                                                    std::span<const SubchainMass> structural) {
  std::vector<SubchainMass> out(structural.begin(), structural.end());
  double z = 0.0;
  for (auto& s : out) {
    s.mass *= subchain_likelihood(params, s.subchain);
    z += s.mass;
  }
  if (z <= 0.0) return {};
  for (auto& s : out) s.mass /= z;
  return out;
}

using ActionMask = std::array<bool, kNumActions>;

// Omega_{A*}: actions occurring in some alive goal chain.
inline ActionMask goal_actions(const ChainSpace& chains) {
  ActionMask mask{};
  for (int id = 0; id < chains.size(); ++id) {
    if (!chains.alive(id)) continue;
    for (const auto& s : chains.chain(id).subchains) mask[s.action.index()] = true;
  }
  return mask;
}

struct ActionPosterior {
  std::array<double, kNumActions> p{};
  ActionMask support{};

  bool empty() const { return std::none_of(support.begin(), support.end(), [](bool b) { return b; }); }
  double operator[](Action a) const { return p[a.index()]; }
};

// Sums subchain mass by action, keeps only allowed actions, renormalizes.
inline ActionPosterior action_posterior(std::span<const SubchainMass> posterior, const ActionMask& allowed) {
  ActionPosterior out;
  double z = 0.0;
  for (const auto& s : posterior) {
    const int a = s.subchain.action.index();
    if (!allowed[a] || s.mass <= 0.0) continue;
    out.p[a] += s.mass;
    out.support[a] = true;
    z += s.mass;
  }
  if (z > 0.0) {
    for (double& v : out.p) v /= z;
  }
  return out;
}

inline constexpr double kTieTolerance = 1e-12;

// Indices whose score is within a relative tolerance of the best one.
template <class Scores, class Mask>
std::vector<int> argmax_set(const Scores& scores, const Mask& mask) {
  double best = -1.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) best = std::max(best, scores[i]);
  }
  std::vector<int> ties;
  if (best < 0.0) return ties;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i] && scores[i] >= best * (1.0 - kTieTolerance)) ties.push_back(static_cast<int>(i));
  }
  return ties;
}

// argmax over the posterior support; exact ties are broken uniformly at random.
template <class UniformRng>
Action select_intervention(const ActionPosterior& posterior, UniformRng& rng) {
  const auto ties = argmax_set(posterior.p, posterior.support);
  if (ties.empty()) throw std::invalid_argument("select_intervention: empty posterior support");
  if (ties.size() == 1) return Action::from_index(ties.front());
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return Action::from_index(ties[pick(rng)]);
}

// How an abstract schema's belief is split over its surviving
// instantiations: evenly, or in proportion to the associative likelihood of
// the lever actions bound to its roles.
enum class InstantiationWeighting { Uniform, Associative };

struct AgentOptions {
  LikelihoodMode mode = LikelihoodMode::Sample;
  double lambda = 1.0;
  InstantiationWeighting weighting = InstantiationWeighting::Associative;
};

// Associative likelihood of each lever action in a trial. The door is never
// bound to a role and gets weight zero.
inline ActionWeights binding_weights(const LikelihoodParams& params, const TrialConfig& trial) {
  ActionWeights w{};
  for (int a = 0; a < kNumActions; ++a) {
    const Action act = Action::from_index(a);
    if (!act.is_door()) w[a] = subchain_likelihood(params, make_subchain(act, trial, 0));
  }
  return w;
}

struct RankedAction {
  Action action;
  double p = 0.0;
};

inline std::vector<RankedAction> top_actions(const ActionPosterior& posterior, std::size_t k) {
  std::vector<RankedAction> out;
  for (int a = 0; a < kNumActions; ++a) {
    if (posterior.support[a]) out.push_back({Action::from_index(a), posterior.p[a]});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.p > y.p; });
  if (out.size() > k) out.resize(k);
  return out;
}

struct AttemptLog {
  std::string trial_id;
  int attempt_index = 0;
  ActionSequence actions;
  std::vector<CausalEvent> events;
  bool solution_found = false;
  int pruned_count = 0;
  int fallback_count = 0;
  std::vector<std::vector<RankedAction>> posterior_top3;  // one entry per decision
};

struct TrialResult {
  std::string trial_id;
  int attempts_used = 0;
  int solutions_found = 0;
  bool completed = false;
  int atomic_updates = 0;
};

// Everything the agent believed when it made one decision. Views are only
// valid for the duration of the callback.
struct DecisionView {
  int attempt_index = 0;
  int action_index = 0;
  std::span<const Action> tau;
  const AtomicBelief& atomic;
  std::span<const double> abstract;
  const SparseBelief& instantiated;
  std::span<const double> chains;
  std::span<const SubchainMass> structural;
  std::span<const SubchainMass> posterior;
  const ActionPosterior& actions;
  Action chosen;
  bool fallback = false;
};

class AgentObserver {
 public:
  virtual ~AgentObserver() = default;
  virtual void on_decision(const DecisionView&) {}
  virtual void on_attempt(const AttemptLog&) {}
  virtual void on_trial(const TrialResult&) {}
};

class Agent {
 public:
  explicit Agent(std::uint64_t seed, AgentOptions options = {}) : rng_(seed), options_(options) {
    beta_.mode = options.mode;
    gamma_.lambda = options.lambda;
  }

  const BetaTheory& beta() const { return beta_; }
  const GammaTheory& gamma() const { return gamma_; }
  const EnvState& env() const { return trial().env; }
  const ChainSpace& chains() const { return trial().chains; }
  const SchemaTracker& tracker() const { return *trial().tracker; }
  bool in_trial() const { return trial_.has_value(); }

  void begin_trial(const TrialConfig& config, int attempt_budget) {
    Trial t{new_trial(config, attempt_budget), ChainSpace(config), std::nullopt, {}, true};
    const auto& space = standard_instantiations(config.num_solutions());
    t.tracker.emplace(space, abstract_belief(gamma_, space));
    trial_.emplace(std::move(t));
    beta_ = openlock::begin_trial(beta_);
  }

  // One attempt of three decide -> act -> observe steps. A lever action that
  // causes nothing leaves the room unchanged, so it is dropped from the
  // effective prefix and the failed prefix is pruned right away.
  AttemptLog run_attempt(AgentObserver* observer = nullptr) {
    Trial& t = trial();
    if (t.env.trial_over()) throw ProtocolError("run_attempt: trial is over");
    AttemptLog log;
    log.trial_id = t.env.config.trial_id;
    log.attempt_index = t.env.attempts_used();
    ActionSequence tau;
    for (int i = 0; i < kActionsPerAttempt; ++i) {
      if (t.dirty) {
        t.tracker->filter(t.chains, t.q_ids);
        t.dirty = false;
      }
      const auto params = likelihood_parameters(beta_, rng_);
      if (options_.weighting == InstantiationWeighting::Associative) {
        const auto weights = binding_weights(params, t.env.config);
        t.tracker->update(t.chains, t.q_ids, &weights);
      } else {
        t.tracker->update(t.chains, t.q_ids);
      }
      const auto structural = subchain_belief(t.chains, t.tracker->chains(), tau);
      std::vector<SubchainMass> posterior;
      ActionPosterior actions;
      if (!structural.empty()) {
        posterior = subchain_posterior(params, structural);
        actions = action_posterior(posterior, goal_actions(t.chains));
      }
      const bool fallback = actions.empty();
      const Action chosen = fallback ? fallback_action(params, tau.size(), log.actions) : select_intervention(actions, rng_);
      log.fallback_count += fallback ? 1 : 0;
      log.posterior_top3.push_back(top_actions(actions, 3));

      if (observer) {
        const auto atomic = atomic_prior(gamma_);
        observer->on_decision(DecisionView{log.attempt_index, i, tau, atomic, t.tracker->abstract(),
                                           t.tracker->instantiated(), t.tracker->chains(), structural, posterior,
                                           actions, chosen, fallback});
      }

      StepResult r = step(t.env, chosen);
      beta_ = observe(beta_, r.event, t.env.config);
      log.actions.push_back(chosen);
      log.events.push_back(r.event);
      if (r.event.empty()) {
        if (tau.size() < kChainLength) {
          ActionSequence prefix = tau;
          prefix.push_back(chosen);
          const int n = t.chains.prune_prefix(prefix);
          log.pruned_count += n;
          t.dirty = t.dirty || n > 0;
        }
      } else {
        tau.push_back(chosen);
      }
      if (r.new_solution) {
        log.solution_found = true;
        t.q_ids.push_back(t.chains.id_of(r.state.found_solutions.back()));
        t.dirty = true;
      }
      t.env = std::move(r.state);
      if (r.attempt_ended) break;
    }
    if (observer) observer->on_attempt(log);
    return log;
  }

  // Closes the trial: one atomic-schema update from the discovered structure.
  TrialResult finish_trial() {
    Trial& t = trial();
    TrialResult result;
    result.trial_id = t.env.config.trial_id;
    result.attempts_used = t.env.attempts_used();
    result.solutions_found = static_cast<int>(t.env.found_solutions.size());
    result.completed = t.env.trial_complete();
    if (!t.env.found_solutions.empty()) {
      gamma_ = update_atomic(gamma_, solution_structure(t.env.found_solutions));
      result.atomic_updates = 1;
    }
    trial_.reset();
    return result;
  }

  TrialResult run_trial(const TrialConfig& config, int attempt_budget, AgentObserver* observer = nullptr) {
    begin_trial(config, attempt_budget);
    while (!trial().env.trial_over()) run_attempt(observer);
    auto result = finish_trial();
    if (observer) observer->on_trial(result);
    return result;
  }

 private:
  struct Trial {
    EnvState env;
    ChainSpace chains;
    std::optional<SchemaTracker> tracker;
    std::vector<int> q_ids;
    bool dirty = true;
  };

  Trial& trial() {
    if (!trial_) throw ProtocolError("agent is not in a trial");
    return *trial_;
  }
  const Trial& trial() const {
    if (!trial_) throw ProtocolError("agent is not in a trial");
    return *trial_;
  }

  // Used when tau matches no surviving chain: the most likely action under
  // beta that was not already tried in this attempt. The door only competes
  // once two lever events have happened.
  Action fallback_action(const LikelihoodParams& params, std::size_t depth, const ActionSequence& executed) {
    const TrialConfig& cfg = trial().env.config;
    std::array<double, kNumActions> score{};
    std::array<bool, kNumActions> mask{};
    for (int a = 0; a < kNumActions; ++a) {
      const Action act = Action::from_index(a);
      if (std::find(executed.begin(), executed.end(), act) != executed.end()) continue;
      if (act.is_door() && depth < 2) continue;
      mask[a] = true;
      score[a] = subchain_likelihood(params, make_subchain(act, cfg, static_cast<int>(std::min<std::size_t>(depth, 1))));
    }
    const auto ties = argmax_set(score, mask);
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    return Action::from_index(ties[pick(rng_)]);
  }

  Rng rng_;
  AgentOptions options_;
  BetaTheory beta_;
  GammaTheory gamma_;
  std::optional<Trial> trial_;
};

}  // namespace openlock
