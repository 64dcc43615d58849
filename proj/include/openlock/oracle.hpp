#pragma once

// Scripted agent that knows the schema kind but not the lever layout. One
// probe attempt pushes grey levers and reads the lock transitions to recover
// every role; each further attempt executes one solution.

#include <algorithm>
#include <optional>
#include <vector>

#include "openlock/env.hpp"

namespace openlock {

struct OracleResult {
  std::string trial_id;
  int attempts_used = 0;
  int solutions_found = 0;
  bool completed = false;
  std::vector<ActionSequence> attempts;
};

namespace detail {

inline std::vector<Position> grey_levers(const EnvState& s) {
  std::vector<Position> out;
  for (const auto& l : s.levers) {
    if (l.color == Color::Grey) out.push_back(l.position);
  }
  return out;
}

inline std::vector<Position> unlocked_by(const CausalEvent& e) {
  std::vector<Position> out;
  for (const auto& t : e.transitions) {
    if (!t.entity.is_door() && t.fluent == Fluent::LockStatus && t.after == static_cast<std::uint8_t>(LockStatus::Unlocked)) {
      out.push_back(t.entity.position());
    }
  }
  return out;
}

// Plays the rest of the current attempt with door pushes.
inline void finish_attempt(EnvState& s, ActionSequence& played) {
  while (s.actions_left_in_attempt > 0 && !s.trial_over()) {
    const bool last = s.actions_left_in_attempt == 1;
    StepResult r = step(s, Action::push_door());
    played.push_back(Action::push_door());
    s = std::move(r.state);
    if (last) break;
  }
}

}  // namespace detail

inline OracleResult run_oracle(const TrialConfig& config, int attempt_budget = 30) {
  EnvState s = new_trial(config, attempt_budget);
  OracleResult result;
  result.trial_id = config.trial_id;
  const auto greys = detail::grey_levers(s);
  const bool cc = is_common_cause(config.schema);

  // Probe. CC: the first grey lever that moves is the root and its event
  // lists the children. CE: any parent that moves unlocks the sink.
  std::optional<Position> hub;  // CC root or CE sink
  std::vector<Position> failed;
  ActionSequence probe;
  for (Position p : greys) {
    if (s.actions_left_in_attempt == 0 || hub) break;
    StepResult r = step(s, Action::push(p));
    probe.push_back(Action::push(p));
    const bool attempt_over = r.attempt_ended;
    const CausalEvent ev = r.event;
    s = std::move(r.state);
    if (ev.empty()) {
      failed.push_back(p);
      if (!cc) hub = p;
    } else if (cc) {
      hub = p;
    } else {
      const auto u = detail::unlocked_by(ev);
      if (!u.empty()) hub = u.front();
    }
    if (attempt_over) break;
  }
  if (!hub && cc && failed.size() + 1 == greys.size()) {
    for (Position p : greys) {
      if (std::find(failed.begin(), failed.end(), p) == failed.end()) hub = p;
    }
  }
  if (s.actions_left_in_attempt > 0 && s.actions_left_in_attempt < kActionsPerAttempt) detail::finish_attempt(s, probe);
  result.attempts.push_back(probe);
  if (!hub) throw std::logic_error("oracle probe could not identify the lever roles");

  for (Position other : greys) {
    if (other == *hub || s.trial_over()) continue;
    const ActionSequence plan = cc ? ActionSequence{Action::push(*hub), Action::push(other), Action::push_door()}
                                   : ActionSequence{Action::push(other), Action::push(*hub), Action::push_door()};
    for (Action a : plan) s = step(s, a).state;
    result.attempts.push_back(plan);
  }
  result.attempts_used = s.attempts_used();
  result.solutions_found = static_cast<int>(s.found_solutions.size());
  result.completed = s.trial_complete();
  return result;
}

}  // namespace openlock
