#include <gtest/gtest.h>

#include <sstream>

#include "openlock/json_io.hpp"
#include "support/generators.hpp"

using namespace openlock;
using nlohmann::json;

namespace {

int line_count(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

std::vector<json> lines(const std::string& s) {
  std::vector<json> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST(ActionJson, RoundTripAllActions) {
  for (Action a : all_actions()) EXPECT_EQ(action_from_json(action_to_json(a)), a);
  EXPECT_EQ(action_to_json(Action::push_door()), (json{{"verb", "PUSH"}, {"target", "DOOR"}}));
  EXPECT_EQ(action_from_json(json{{"verb", "pull"}, {"target", "lower_left"}}), Action::pull(Position::LowerLeft));
}

TEST(ActionJson, Errors) {
  EXPECT_THROW(action_from_json(json{{"verb", "PULL"}, {"target", "DOOR"}}), ConfigError);
  EXPECT_THROW(action_from_json(json{{"verb", "PUSH"}, {"target", "MIDDLE"}}), ConfigError);
  EXPECT_THROW(action_from_json(json{{"verb", "TWIST"}, {"target", "UPPER_LEFT"}}), ConfigError);
  EXPECT_THROW(action_from_json(json{{"verb", "PUSH"}}), ConfigError);
  EXPECT_THROW(action_from_json(json{{"verb", 3}, {"target", "DOOR"}}), ConfigError);
  EXPECT_THROW(action_from_json(json::array()), ConfigError);
}

TEST(TrialJson, RoundTripGenerated) {
  gen::Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    const auto t = gen::trial(rng);
    const auto j = trial_to_json(t);
    EXPECT_EQ(j["role_map"].size(), static_cast<std::size_t>(t.num_roles()));
    const auto back = trial_from_json(j);
    EXPECT_EQ(back.schema, t.schema);
    EXPECT_EQ(back.roles, t.roles);
    EXPECT_EQ(back.trial_id, t.trial_id);
  }
}

TEST(TrialJson, Errors) {
  const json ok{{"schema", "CC3"}, {"role_map", {{"L0", "UPPER_RIGHT"}, {"L1", "LOWER_RIGHT"}, {"L2", "LOWER_LEFT"}}}};
  EXPECT_NO_THROW(trial_from_json(ok));
  auto wrong_count = ok;
  wrong_count["role_map"].erase("L2");
  EXPECT_THROW(trial_from_json(wrong_count), ConfigError);
  auto dup = ok;
  dup["role_map"]["L2"] = "UPPER_RIGHT";
  EXPECT_THROW(trial_from_json(dup), ConfigError);
  auto bad_schema = ok;
  bad_schema["schema"] = "CC5";
  EXPECT_THROW(trial_from_json(bad_schema), ConfigError);
  auto bad_pos = ok;
  bad_pos["role_map"]["L1"] = "CENTER";
  EXPECT_THROW(trial_from_json(bad_pos), ConfigError);
  auto bad_id = ok;
  bad_id["trial_id"] = 5;
  EXPECT_THROW(trial_from_json(bad_id), ConfigError);
}

TEST(StateJson, FieldsAndObservation) {
  gen::Rng rng(103);
  for (int i = 0; i < 50; ++i) {
    auto s = new_trial(gen::trial(rng), 30);
    for (Action a : gen::actions(rng, 10)) {
      s = step(s, a).state;
      const auto j = state_to_json(s);
      for (const char* key : {"trial", "levers", "door", "budgets", "q", "current_attempt", "solutions_found",
                              "solutions_total", "trial_complete", "trial_over", "observation"}) {
        EXPECT_TRUE(j.contains(key)) << key;
      }
      const auto obs = encode_observation(s);
      EXPECT_EQ(j["observation"].get<std::vector<int>>(), std::vector<int>(obs.begin(), obs.end()));
      EXPECT_EQ(j["levers"].size(), 7u);
      EXPECT_EQ(j["current_attempt"].size(), s.current_attempt.size());
      EXPECT_EQ(j["budgets"]["attempts_used"], s.attempts_used());
      if (s.trial_over()) break;
    }
  }
}

TEST(StateJson, DiffAfterRootPush) {
  const auto seq = standard_trial_sequence(SequenceKind::Training3, SchemaKind::CC3, 0);
  const auto& cfg = seq.front();
  const auto s0 = new_trial(cfg, 30);
  const auto r = step(s0, Action::push(cfg.roles[0]));
  const auto before = state_to_json(s0);
  const auto after = state_to_json(r.state);
  const auto d = state_diff(before, after);
  // Root pushed, both children unlocked.
  ASSERT_TRUE(d.contains("levers"));
  EXPECT_EQ(d["levers"].size(), 3u);
  EXPECT_TRUE(d.contains("budgets"));
  EXPECT_FALSE(d.contains("door"));
  EXPECT_FALSE(d.contains("q"));
  EXPECT_TRUE(state_diff(after, after).empty());
}

TEST(EventJson, RootPushTransitions) {
  const auto cfg = standard_trial_sequence(SequenceKind::Training3, SchemaKind::CC3, 0).front();
  const auto r = step(new_trial(cfg, 30), Action::push(cfg.roles[0]));
  const auto j = event_to_json(r.event);
  EXPECT_EQ(j["action"], action_to_json(Action::push(cfg.roles[0])));
  ASSERT_EQ(j["transitions"].size(), 3u);
  const auto& first = j["transitions"][0];
  EXPECT_EQ(first["entity"], std::string(to_string(cfg.roles[0])));
  EXPECT_EQ(first["fluent"], "status");
  EXPECT_EQ(first["before"], "PULLED");
  EXPECT_EQ(first["after"], "PUSHED");
  for (int k = 1; k < 3; ++k) {
    EXPECT_EQ(j["transitions"][k]["fluent"], "lock");
    EXPECT_EQ(j["transitions"][k]["after"], "UNLOCKED");
  }
}

TEST(Dumps, LineCounts) {
  const auto cfg = standard_trial_sequence(SequenceKind::Training3, SchemaKind::CC3, 0).front();
  const ChainSpace chains(cfg);
  std::ostringstream c;
  dump_chains(c, chains);
  EXPECT_EQ(line_count(c.str()), 168);
  const auto rows = lines(c.str());
  EXPECT_EQ(rows[5]["id"], 5);
  EXPECT_EQ(rows[5]["chain"].size(), 3u);
  EXPECT_EQ(rows[5]["chain"][2], action_to_json(Action::push_door()));

  const auto& space2 = standard_instantiations(2);
  std::ostringstream a;
  dump_abstract(a, space2);
  EXPECT_EQ(line_count(a.str()), 3);
  int total = 0;
  for (const auto& row : lines(a.str())) total += row["instantiations"].get<int>();
  EXPECT_EQ(total, 8400);

  std::ostringstream a3;
  dump_abstract(a3, standard_instantiations(3));
  EXPECT_EQ(line_count(a3.str()), 6);

  std::ostringstream in;
  dump_instantiations(in, space2, chains);
  EXPECT_EQ(line_count(in.str()), 8400);
}

TEST(DecisionJson, AgentSnapshotShape) {
  struct Capture : AgentObserver {
    const Agent* agent = nullptr;
    std::vector<json> docs;
    void on_decision(const DecisionView& d) override {
      docs.push_back(decision_to_json(d, agent->tracker(), agent->chains()));
    }
  };
  AgentOptions options;
  options.mode = LikelihoodMode::Mean;
  Agent agent(5, options);
  Capture cap;
  cap.agent = &agent;
  agent.begin_trial(standard_trial_sequence(SequenceKind::Training3, SchemaKind::CE3, 0).front(), 30);
  const auto log = agent.run_attempt(&cap);
  ASSERT_EQ(cap.docs.size(), 3u);
  for (std::size_t i = 0; i < cap.docs.size(); ++i) {
    const auto& d = cap.docs[i];
    EXPECT_EQ(d["action_index"], static_cast<int>(i));
    EXPECT_LE(d["abstract_top3"].size(), 3u);
    EXPECT_LE(d["chains_top5"].size(), 5u);
    EXPECT_EQ(d["atomic"].size(), 3u);
    EXPECT_EQ(d["chosen"], action_to_json(log.actions[i]));
    double total = 0.0;
    for (const auto& r : d["actions"]) total += r["p"].get<double>();
    if (!d["fallback"].get<bool>()) {
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
  const auto a = attempt_to_json(log);
  EXPECT_EQ(a["actions"].size(), 3u);
  EXPECT_EQ(a["events"].size(), 3u);
  EXPECT_EQ(a["posterior_top3"].size(), 3u);
  const auto b = beta_to_json(agent.beta());
  EXPECT_EQ(b["mode"], "MEAN");
  EXPECT_EQ(b["position"]["global"].size(), 7u);
}
