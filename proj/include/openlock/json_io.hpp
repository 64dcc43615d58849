#pragma once

// JSON wire formats: trial configs, actions, events, state documents, belief
// snapshots, attempt logs and line-per-item dumps of the hypothesis spaces.

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "openlock/env.hpp"
#include "openlock/hypothesis.hpp"
#include "openlock/planner.hpp"
#include "openlock/structure_learner.hpp"

namespace openlock {

using nlohmann::json;

namespace detail {

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw ConfigError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Actions

inline json action_to_json(Action a) {
  return {{"verb", std::string(to_string(a.verb))}, {"target", std::string(to_string(a.target))}};
}

inline Action action_from_json(const json& j) {
  const std::string verb = detail::upper(detail::require_string(j, "verb"));
  const std::string target = detail::upper(detail::require_string(j, "target"));
  Verb v;
  if (verb == "PUSH") {
    v = Verb::Push;
  } else if (verb == "PULL") {
    v = Verb::Pull;
  } else {
    throw ConfigError("unknown verb '" + verb + "'");
  }
  if (target == "DOOR") {
    if (v == Verb::Pull) throw ConfigError("the door can only be pushed");
    return Action::push_door();
  }
  const auto p = parse_position(target);
  if (!p) throw ConfigError("unknown target '" + target + "'");
  return Action{v, Target::lever(*p)};
}

// ---------------------------------------------------------------------------
// Trial configs: {schema, role_map: {L0: "UPPER", ...}, trial_id}

inline json trial_to_json(const TrialConfig& t) {
  json roles = json::object();
  for (int r = 0; r < t.num_roles(); ++r) roles["L" + std::to_string(r)] = std::string(to_string(t.roles[r]));
  return {{"schema", std::string(to_string(t.schema))}, {"role_map", roles}, {"trial_id", t.trial_id}};
}

inline TrialConfig trial_from_json(const json& j) {
  TrialConfig t;
  const std::string schema = detail::require_string(j, "schema");
  const auto kind = parse_schema(schema);
  if (!kind) throw ConfigError("unknown schema '" + schema + "'");
  t.schema = *kind;
  const json& roles = detail::require(j, "role_map");
  if (!roles.is_object()) throw ConfigError("role_map must be an object");
  const int n = role_count(t.schema);
  t.roles.resize(n);
  if (static_cast<int>(roles.size()) != n) {
    throw ConfigError("role_map for " + schema + " needs " + std::to_string(n) + " roles");
  }
  for (int r = 0; r < n; ++r) {
    const std::string key = "L" + std::to_string(r);
    const std::string name = detail::upper(detail::require_string(roles, key.c_str()));
    const auto p = parse_position(name);
    if (!p) throw ConfigError("unknown position '" + name + "' for role " + key);
    t.roles[r] = *p;
  }
  if (j.contains("trial_id")) {
    if (!j["trial_id"].is_string()) throw ConfigError("trial_id must be a string");
    t.trial_id = j["trial_id"].get<std::string>();
  }
  validate(t);
  return t;
}

// ---------------------------------------------------------------------------
// Events

inline std::string fluent_value_name(Fluent f, std::uint8_t v) {
  switch (f) {
    case Fluent::LeverStatus: return std::string(to_string(static_cast<LeverStatus>(v)));
    case Fluent::LockStatus: return std::string(to_string(static_cast<LockStatus>(v)));
    case Fluent::DoorOpen: return v ? "OPEN" : "CLOSED";
  }
  return "?";
}

inline json transition_to_json(const Transition& t) {
  return {{"entity", std::string(to_string(t.entity))},
          {"fluent", std::string(to_string(t.fluent))},
          {"before", fluent_value_name(t.fluent, t.before)},
          {"after", fluent_value_name(t.fluent, t.after)}};
}

inline json event_to_json(const CausalEvent& e) {
  json tr = json::array();
  for (const auto& t : e.transitions) tr.push_back(transition_to_json(t));
  return {{"action", action_to_json(e.action)}, {"transitions", tr}};
}

// ---------------------------------------------------------------------------
// State document

inline json sequence_targets(const ActionSequence& seq) {
  json out = json::array();
  for (Action a : seq) out.push_back(std::string(to_string(a.target)));
  return out;
}

inline json state_to_json(const EnvState& s) {
  json levers = json::array();
  for (const auto& l : s.levers) {
    levers.push_back({{"position", std::string(to_string(l.position))},
                      {"color", std::string(to_string(l.color))},
                      {"status", std::string(to_string(l.status))},
                      {"locked", l.lock == LockStatus::Locked}});
  }
  json q = json::array();
  for (const auto& seq : s.found_solutions) q.push_back(sequence_targets(seq));
  json current = json::array();
  for (Action a : s.current_attempt) current.push_back(action_to_json(a));
  const auto obs = encode_observation(s);
  return {{"trial", trial_to_json(s.config)},
          {"levers", levers},
          {"door", {{"open", s.door_open}, {"locked", s.door_locked}}},
          {"budgets",
           {{"actions_left_in_attempt", s.actions_left_in_attempt},
            {"attempts_left_in_trial", s.attempts_left_in_trial},
            {"attempts_used", s.attempts_used()},
            {"attempt_budget", s.attempt_budget}}},
          {"q", q},
          {"current_attempt", current},
          {"solutions_found", s.found_solutions.size()},
          {"solutions_total", s.config.num_solutions()},
          {"trial_complete", s.trial_complete()},
          {"trial_over", s.trial_over()},
          {"observation", std::vector<int>(obs.begin(), obs.end())}};
}

// Fields of `after` that differ from `before`: changed levers by position,
// the door if it changed, budgets and q if they changed.
inline json state_diff(const json& before, const json& after) {
  json d = json::object();
  json levers = json::array();
  for (std::size_t i = 0; i < after["levers"].size(); ++i) {
    if (i >= before["levers"].size() || before["levers"][i] != after["levers"][i]) levers.push_back(after["levers"][i]);
  }
  if (!levers.empty()) d["levers"] = levers;
  for (const char* key : {"door", "budgets", "q", "trial_complete", "trial_over"}) {
    if (before[key] != after[key]) d[key] = after[key];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Beliefs

inline json beta_to_json(const BetaTheory& beta) {
  json out = json::object();
  for (int d = 0; d < kBetaDimensions; ++d) {
    const std::string name(to_string(static_cast<BetaDimension>(d)));
    out[name] = {{"global", beta.global[d].alpha}, {"local", beta.local[d].alpha}, {"k", beta.scale[d]}};
  }
  out["mode"] = beta.mode == LikelihoodMode::Mean ? "MEAN" : "SAMPLE";
  return out;
}

inline json chain_to_json(const CausalChain& c) {
  json out = json::array();
  for (const auto& s : c.subchains) out.push_back(action_to_json(s.action));
  return out;
}

namespace detail {

template <class Values>
std::vector<int> top_indices(const Values& p, std::size_t k) {
  std::vector<int> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p[a] > p[b]; });
  while (!idx.empty() && p[idx.back()] <= 0.0) idx.pop_back();
  if (idx.size() > k) idx.resize(k);
  return idx;
}

}  // namespace detail

// Per-decision snapshot: atomic prior, top-3 abstract schemas, top-5 chains
// and the action posterior.
inline json decision_to_json(const DecisionView& d, const SchemaTracker& tracker, const ChainSpace& chains) {
  json atomic = json::object();
  for (std::size_t m = 0; m < kAtomicSchemas.size(); ++m) atomic[std::string(to_string(kAtomicSchemas[m]))] = d.atomic[m];
  json abstract = json::array();
  for (int a : detail::top_indices(d.abstract, 3)) {
    abstract.push_back({{"schema", tracker.space().abstract_schemas()[a].describe()}, {"p", d.abstract[a]}});
  }
  json top_chains = json::array();
  for (int id : detail::top_indices(d.chains, 5)) {
    top_chains.push_back({{"chain", chain_to_json(chains.chain(id))}, {"p", d.chains[id]}});
  }
  json actions = json::array();
  for (const auto& r : top_actions(d.actions, kNumActions)) actions.push_back({{"action", action_to_json(r.action)}, {"p", r.p}});
  json tau = json::array();
  for (Action a : d.tau) tau.push_back(action_to_json(a));
  return {{"attempt_index", d.attempt_index},
          {"action_index", d.action_index},
          {"tau", tau},
          {"atomic", atomic},
          {"abstract_top3", abstract},
          {"chains_top5", top_chains},
          {"instantiated_support", d.instantiated.ids.size()},
          {"actions", actions},
          {"chosen", action_to_json(d.chosen)},
          {"fallback", d.fallback}};
}

inline json attempt_to_json(const AttemptLog& log) {
  json actions = json::array();
  for (Action a : log.actions) actions.push_back(action_to_json(a));
  json events = json::array();
  for (const auto& e : log.events) events.push_back(event_to_json(e));
  json top3 = json::array();
  for (const auto& decision : log.posterior_top3) {
    json row = json::array();
    for (const auto& r : decision) row.push_back({{"action", action_to_json(r.action)}, {"p", r.p}});
    top3.push_back(row);
  }
  return {{"trial_id", log.trial_id},           {"attempt_index", log.attempt_index},
          {"actions", actions},                 {"events", events},
          {"solution_found", log.solution_found}, {"pruned_count", log.pruned_count},
          {"fallback_count", log.fallback_count}, {"posterior_top3", top3}};
}

// ---------------------------------------------------------------------------
// Space dumps, one JSON document per line.

inline void dump_chains(std::ostream& out, const ChainSpace& chains) {
  for (int id = 0; id < chains.size(); ++id) {
    out << json{{"kind", "chain"}, {"id", id}, {"alive", chains.alive(id)}, {"chain", chain_to_json(chains.chain(id))}}.dump()
        << '\n';
  }
}

inline void dump_abstract(std::ostream& out, const InstantiationSpace& space) {
  for (std::size_t a = 0; a < space.abstract_schemas().size(); ++a) {
    const auto& s = space.abstract_schemas()[a];
    const auto& d = space.atomic_distances()[a];
    json chains = json::array();
    for (const auto& c : s.chains) chains.push_back({c[0], c[1]});
    out << json{{"kind", "abstract"},
                {"index", a},
                {"solutions", space.solutions()},
                {"schema", s.describe()},
                {"roles", s.num_roles()},
                {"chains", chains},
                {"instantiations", space.end(static_cast<int>(a)) - space.begin(static_cast<int>(a))},
                {"ged", {{"CHAIN", d[0]}, {"CC", d[1]}, {"CE", d[2]}}}}
               .dump()
        << '\n';
  }
}

inline void dump_instantiations(std::ostream& out, const InstantiationSpace& space, const ChainSpace& chains) {
  for (int i = 0; i < space.size(); ++i) {
    const auto& inst = space.items()[i];
    json cs = json::array();
    for (std::uint8_t id : inst.chain_ids()) cs.push_back(chain_to_json(chains.chain(id)));
    json bound = json::array();
    for (std::uint8_t a : inst.bound_actions()) bound.push_back(action_to_json(Action::from_index(a)));
    out << json{{"kind", "instantiated"}, {"id", i}, {"abstract", inst.abstract_index}, {"roles", bound}, {"chains", cs}}.dump()
        << '\n';
  }
}

}  // namespace openlock
