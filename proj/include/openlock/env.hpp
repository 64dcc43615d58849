#pragma once

// OpenLock escape-room simulator.
//
// Seven levers sit on radial slots around a locked door. A trial binds the
// causal roles L0..L3 of a CC or CE locking schema to lever positions; every
// other lever is white and permanently locked. An attempt is three actions,
// after which all fluents reset. The state is a value and every transition is
// a pure function of (state, action).

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace openlock {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kNumLevers = 7;
inline constexpr int kActionsPerAttempt = 3;
inline constexpr int kNumActions = 2 * kNumLevers + 1;

// Index 0 is upper-right; indices proceed counter-clockwise.
enum class Position : std::uint8_t {
  UpperRight = 0,
  Upper,
  UpperLeft,
  Left,
  LowerLeft,
  Lower,
  LowerRight,
};

inline constexpr std::array<Position, kNumLevers> kAllPositions = {
    Position::UpperRight, Position::Upper, Position::UpperLeft, Position::Left,
    Position::LowerLeft,  Position::Lower, Position::LowerRight};

inline constexpr std::array<std::string_view, kNumLevers> kPositionNames = {
    "UPPER_RIGHT", "UPPER", "UPPER_LEFT", "LEFT", "LOWER_LEFT", "LOWER", "LOWER_RIGHT"};

constexpr int index_of(Position p) { return static_cast<int>(p); }

inline std::string_view to_string(Position p) { return kPositionNames[index_of(p)]; }

inline std::optional<Position> parse_position(std::string_view name) {
  for (int i = 0; i < kNumLevers; ++i) {
    if (kPositionNames[i] == name) return static_cast<Position>(i);
  }
  return std::nullopt;
}

enum class Color : std::uint8_t { Grey = 0, White = 1 };
enum class LeverStatus : std::uint8_t { Pulled = 0, Pushed = 1 };
enum class LockStatus : std::uint8_t { Locked = 0, Unlocked = 1 };

inline std::string_view to_string(Color c) { return c == Color::Grey ? "GREY" : "WHITE"; }
inline std::string_view to_string(LeverStatus s) { return s == LeverStatus::Pushed ? "PUSHED" : "PULLED"; }
inline std::string_view to_string(LockStatus s) { return s == LockStatus::Locked ? "LOCKED" : "UNLOCKED"; }

enum class Verb : std::uint8_t { Push = 0, Pull = 1 };

inline std::string_view to_string(Verb v) { return v == Verb::Push ? "PUSH" : "PULL"; }

// Either a lever position or the door.
struct Target {
  static constexpr std::uint8_t kDoor = kNumLevers;
  std::uint8_t value = kDoor;

  static constexpr Target door() { return Target{kDoor}; }
  static constexpr Target lever(Position p) { return Target{static_cast<std::uint8_t>(p)}; }

  constexpr bool is_door() const { return value == kDoor; }
  constexpr Position position() const { return static_cast<Position>(value); }
  friend constexpr bool operator==(Target, Target) = default;
};

inline std::string_view to_string(Target t) { return t.is_door() ? "DOOR" : to_string(t.position()); }

// The action space: push/pull on each lever plus pushing the door (15 actions).
// Actions are dense-indexed: lever p, verb v -> 2p + v; door -> 14.
struct Action {
  Verb verb = Verb::Push;
  Target target = Target::door();

  static constexpr Action push(Position p) { return {Verb::Push, Target::lever(p)}; }
  static constexpr Action pull(Position p) { return {Verb::Pull, Target::lever(p)}; }
  static constexpr Action push_door() { return {Verb::Push, Target::door()}; }

  constexpr int index() const {
    return target.is_door() ? kNumActions - 1 : 2 * target.value + static_cast<int>(verb);
  }
  static constexpr Action from_index(int i) {
    if (i == kNumActions - 1) return push_door();
    return {static_cast<Verb>(i % 2), Target{static_cast<std::uint8_t>(i / 2)}};
  }
  constexpr bool is_door() const { return target.is_door(); }

  friend constexpr bool operator==(Action, Action) = default;
};

inline std::string to_string(Action a) {
  return std::string(to_string(a.verb)) + "_" + std::string(to_string(a.target));
}

inline std::array<Action, kNumActions> all_actions() {
  std::array<Action, kNumActions> out{};
  for (int i = 0; i < kNumActions; ++i) out[i] = Action::from_index(i);
  return out;
}

using ActionSequence = std::vector<Action>;

enum class SchemaKind : std::uint8_t { CC3, CE3, CC4, CE4 };

inline std::string_view to_string(SchemaKind k) {
  switch (k) {
    case SchemaKind::CC3: return "CC3";
    case SchemaKind::CE3: return "CE3";
    case SchemaKind::CC4: return "CC4";
    case SchemaKind::CE4: return "CE4";
  }
  return "?";
}

inline std::optional<SchemaKind> parse_schema(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto k : {SchemaKind::CC3, SchemaKind::CE3, SchemaKind::CC4, SchemaKind::CE4}) {
    if (to_string(k) == up) return k;
  }
  return std::nullopt;
}

constexpr int role_count(SchemaKind k) { return (k == SchemaKind::CC3 || k == SchemaKind::CE3) ? 3 : 4; }
constexpr int solution_count(SchemaKind k) { return role_count(k) - 1; }
constexpr bool is_common_cause(SchemaKind k) { return k == SchemaKind::CC3 || k == SchemaKind::CC4; }

struct TrialConfig {
  SchemaKind schema = SchemaKind::CC3;
  // roles[r] is the lever position that plays role Lr.
  std::vector<Position> roles;
  std::string trial_id;

  int num_roles() const { return static_cast<int>(roles.size()); }
  int num_solutions() const { return solution_count(schema); }

  std::optional<int> role_of(Position p) const {
    for (int r = 0; r < num_roles(); ++r) {
      if (roles[r] == p) return r;
    }
    return std::nullopt;
  }
  Color color_of(Position p) const { return role_of(p) ? Color::Grey : Color::White; }

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

inline void validate(const TrialConfig& config) {
  if (config.num_roles() != role_count(config.schema)) {
    throw ConfigError("trial '" + config.trial_id + "': schema " + std::string(to_string(config.schema)) +
                      " needs " + std::to_string(role_count(config.schema)) + " roles, got " +
                      std::to_string(config.num_roles()));
  }
  std::array<bool, kNumLevers> used{};
  for (Position p : config.roles) {
    if (index_of(p) < 0 || index_of(p) >= kNumLevers) throw ConfigError("role position out of range");
    if (used[index_of(p)]) {
      throw ConfigError("trial '" + config.trial_id + "': position " + std::string(to_string(p)) +
                        " bound to more than one role");
    }
    used[index_of(p)] = true;
  }
}

struct LeverState {
  Position position = Position::UpperRight;
  Color color = Color::White;
  LeverStatus status = LeverStatus::Pulled;
  LockStatus lock = LockStatus::Locked;

  friend bool operator==(const LeverState&, const LeverState&) = default;
};

struct EnvState {
  TrialConfig config;
  std::array<LeverState, kNumLevers> levers{};
  bool door_open = false;
  bool door_locked = true;
  int actions_left_in_attempt = kActionsPerAttempt;
  int attempts_left_in_trial = 0;
  int attempt_budget = 0;
  std::vector<ActionSequence> found_solutions;
  ActionSequence current_attempt;

  int attempts_used() const { return attempt_budget - attempts_left_in_trial; }
  bool trial_complete() const { return static_cast<int>(found_solutions.size()) >= config.num_solutions(); }
  bool trial_over() const { return trial_complete() || attempts_left_in_trial <= 0; }

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

// Which fluent a transition refers to. Door fluents are attached to the door
// entity; lever fluents to a position.
enum class Fluent : std::uint8_t { LeverStatus, LockStatus, DoorOpen };

inline std::string_view to_string(Fluent f) {
  switch (f) {
    case Fluent::LeverStatus: return "status";
    case Fluent::LockStatus: return "lock";
    case Fluent::DoorOpen: return "open";
  }
  return "?";
}

struct Transition {
  Target entity;
  Fluent fluent = Fluent::LeverStatus;
  std::uint8_t before = 0;
  std::uint8_t after = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// An executed action and the fluent transitions it produced. An empty
// transition list means the action caused nothing.
struct CausalEvent {
  Action action;
  std::vector<Transition> transitions;

  bool empty() const { return transitions.empty(); }
  friend bool operator==(const CausalEvent&, const CausalEvent&) = default;
};

using Observation = std::array<std::uint8_t, 16>;

struct StepResult {
  EnvState state;        // after attempt bookkeeping; fluents are reset if the attempt ended
  CausalEvent event;
  Observation observation{};  // encoding of the state right after the action, before any reset
  bool door_opened = false;
  bool new_solution = false;
  bool already_found = false;
  bool attempt_ended = false;
};

namespace detail {

inline bool lever_pushed(const EnvState& s, Position p) {
  return s.levers[index_of(p)].status == LeverStatus::Pushed;
}

// Lock fluents are a pure function of the parents' lever status.
inline void recompute_locks(EnvState& s) {
  const TrialConfig& cfg = s.config;
  const int k = cfg.num_roles();
  for (auto& lever : s.levers) lever.lock = LockStatus::Locked;
  bool door_unlocked = false;
  if (is_common_cause(cfg.schema)) {
    const bool root_pushed = lever_pushed(s, cfg.roles[0]);
    s.levers[index_of(cfg.roles[0])].lock = LockStatus::Unlocked;
    for (int r = 1; r < k; ++r) {
      s.levers[index_of(cfg.roles[r])].lock = root_pushed ? LockStatus::Unlocked : LockStatus::Locked;
      door_unlocked = door_unlocked || lever_pushed(s, cfg.roles[r]);
    }
  } else {
    bool any_parent = false;
    for (int r = 0; r + 1 < k; ++r) {
      s.levers[index_of(cfg.roles[r])].lock = LockStatus::Unlocked;
      any_parent = any_parent || lever_pushed(s, cfg.roles[r]);
    }
    s.levers[index_of(cfg.roles[k - 1])].lock = any_parent ? LockStatus::Unlocked : LockStatus::Locked;
    door_unlocked = lever_pushed(s, cfg.roles[k - 1]);
  }
  s.door_locked = !door_unlocked;
}

inline void reset_fluents(EnvState& s) {
  for (int i = 0; i < kNumLevers; ++i) {
    auto& lever = s.levers[i];
    lever.position = static_cast<Position>(i);
    lever.color = s.config.color_of(lever.position);
    lever.status = LeverStatus::Pulled;
  }
  s.door_open = false;
  recompute_locks(s);
  s.current_attempt.clear();
  s.actions_left_in_attempt = kActionsPerAttempt;
}

inline std::vector<Transition> diff(const EnvState& before, const EnvState& after, Target acted) {
  std::vector<Transition> out;
  auto lever_diff = [&](int i) {
    const auto& a = before.levers[i];
    const auto& b = after.levers[i];
    const Target t = Target::lever(static_cast<Position>(i));
    if (a.status != b.status) {
      out.push_back({t, Fluent::LeverStatus, static_cast<std::uint8_t>(a.status), static_cast<std::uint8_t>(b.status)});
    }
    if (a.lock != b.lock) {
      out.push_back({t, Fluent::LockStatus, static_cast<std::uint8_t>(a.lock), static_cast<std::uint8_t>(b.lock)});
    }
  };
  if (!acted.is_door()) lever_diff(acted.value);
  for (int i = 0; i < kNumLevers; ++i) {
    if (acted.is_door() || i != acted.value) lever_diff(i);
  }
  if (before.door_locked != after.door_locked) {
    // Door lock is reported as a LockStatus fluent on the door entity.
    out.push_back({Target::door(), Fluent::LockStatus, static_cast<std::uint8_t>(before.door_locked ? 0 : 1),
                   static_cast<std::uint8_t>(after.door_locked ? 0 : 1)});
  }
  if (before.door_open != after.door_open) {
    out.push_back({Target::door(), Fluent::DoorOpen, static_cast<std::uint8_t>(before.door_open),
                   static_cast<std::uint8_t>(after.door_open)});
  }
  return out;
}

}  // namespace detail

inline EnvState new_trial(const TrialConfig& config, int attempt_budget) {
  validate(config);
  if (attempt_budget <= 0) throw ConfigError("attempt budget must be positive");
  EnvState s;
  s.config = config;
  s.attempt_budget = attempt_budget;
  s.attempts_left_in_trial = attempt_budget;
  detail::reset_fluents(s);
  return s;
}

// Applies the lever/door dynamics of one action without touching budgets.
inline EnvState apply_dynamics(const EnvState& s, Action action) {
  EnvState next = s;
  if (action.is_door()) {
    if (action.verb == Verb::Push && !next.door_locked && !next.door_open) next.door_open = true;
    return next;
  }
  auto& lever = next.levers[action.target.value];
  if (lever.lock != LockStatus::Unlocked) return next;
  if (action.verb == Verb::Push && lever.status == LeverStatus::Pulled) {
    lever.status = LeverStatus::Pushed;
  } else if (action.verb == Verb::Pull && lever.status == LeverStatus::Pushed) {
    lever.status = LeverStatus::Pulled;
  } else {
    return next;
  }
  detail::recompute_locks(next);
  return next;
}

// Elements: 7 lever statuses (pushed = 1), 7 lever colors (grey = 1),
// door open, door locked. Lever slots follow Position index order.
inline Observation encode_observation(const EnvState& s) {
  Observation obs{};
  for (int i = 0; i < kNumLevers; ++i) {
    obs[i] = s.levers[i].status == LeverStatus::Pushed ? 1 : 0;
    obs[kNumLevers + i] = s.levers[i].color == Color::Grey ? 1 : 0;
  }
  obs[14] = s.door_open ? 1 : 0;
  obs[15] = s.door_locked ? 1 : 0;
  return obs;
}

inline StepResult step(const EnvState& state, Action action) {
  if (state.trial_complete()) throw ProtocolError("trial already complete");
  if (state.attempts_left_in_trial <= 0) throw ProtocolError("no attempts left in trial");
  if (state.actions_left_in_attempt <= 0) throw ProtocolError("no actions left in attempt");
  if (action.is_door() && action.verb != Verb::Push) throw ProtocolError("the door can only be pushed");

  StepResult out;
  EnvState next = apply_dynamics(state, action);
  out.event.action = action;
  out.event.transitions = detail::diff(state, next, action.target);
  out.observation = encode_observation(next);

  next.current_attempt.push_back(action);
  next.actions_left_in_attempt -= 1;

  if (next.door_open && !state.door_open) {
    out.door_opened = true;
    const auto& q = next.found_solutions;
    if (std::find(q.begin(), q.end(), next.current_attempt) == q.end()) {
      next.found_solutions.push_back(next.current_attempt);
      out.new_solution = true;
    } else {
      out.already_found = true;
    }
  }

  if (next.actions_left_in_attempt == 0) {
    out.attempt_ended = true;
    next.attempts_left_in_trial -= 1;
    detail::reset_fluents(next);
    if (next.attempts_left_in_trial <= 0 || next.trial_complete()) next.actions_left_in_attempt = 0;
  }
  out.state = std::move(next);
  return out;
}

// Ground-truth solutions in role terms, mapped to this trial's positions.
inline std::vector<ActionSequence> solution_oracle(const TrialConfig& config) {
  std::vector<ActionSequence> out;
  const int k = config.num_roles();
  const auto& r = config.roles;
  if (is_common_cause(config.schema)) {
    for (int i = 1; i < k; ++i) out.push_back({Action::push(r[0]), Action::push(r[i]), Action::push_door()});
  } else {
    for (int i = 0; i + 1 < k; ++i) out.push_back({Action::push(r[i]), Action::push(r[k - 1]), Action::push_door()});
  }
  return out;
}

enum class SequenceKind : std::uint8_t { Training3, Transfer4 };

namespace detail {

// Canonical role maps: interchangeable roles (CC children, CE parents) are
// listed in ascending position order, so distinct maps are distinct rooms.
inline std::vector<Position> canonical_roles(SchemaKind schema, std::vector<Position> roles) {
  auto by_index = [](Position a, Position b) { return index_of(a) < index_of(b); };
  if (is_common_cause(schema)) {
    std::sort(roles.begin() + 1, roles.end(), by_index);
  } else {
    std::sort(roles.begin(), roles.end() - 1, by_index);
  }
  return roles;
}

inline std::vector<std::vector<Position>> all_canonical_role_maps(SchemaKind schema) {
  const int k = role_count(schema);
  std::vector<std::vector<Position>> out;
  std::vector<Position> current;
  std::array<bool, kNumLevers> used{};
  auto rec = [&](auto&& self) -> void {
    if (static_cast<int>(current.size()) == k) {
      if (canonical_roles(schema, current) == current) out.push_back(current);
      return;
    }
    for (Position p : kAllPositions) {
      if (used[index_of(p)]) continue;
      used[index_of(p)] = true;
      current.push_back(p);
      self(self);
      current.pop_back();
      used[index_of(p)] = false;
    }
  };
  rec(rec);
  return out;
}

// Fixed layouts for seed 0, given as position indices in role order.
inline constexpr std::array<std::array<int, 3>, 6> kCanonicalThree = {{
    {1, 3, 5}, {4, 0, 2}, {6, 1, 5}, {3, 2, 6}, {0, 4, 5}, {2, 3, 6},
}};
inline constexpr std::array<std::array<int, 4>, 5> kCanonicalFour = {{
    {0, 2, 4, 6}, {5, 0, 1, 3}, {2, 3, 5, 6}, {3, 0, 1, 4}, {6, 1, 3, 4},
}};

}  // namespace detail

// Six 3-lever rooms for training or five 4-lever rooms for the transfer phase.
// Seed 0 yields a fixed canonical list; other seeds sample distinct role maps.
inline std::vector<TrialConfig> standard_trial_sequence(SequenceKind kind, SchemaKind schema, std::uint64_t seed) {
  const int expected_roles = kind == SequenceKind::Training3 ? 3 : 4;
  if (role_count(schema) != expected_roles) {
    throw ConfigError("schema " + std::string(to_string(schema)) + " does not match the requested sequence arity");
  }
  const int count = kind == SequenceKind::Training3 ? 6 : 5;
  std::vector<std::vector<Position>> maps;
  if (seed == 0) {
    auto add = [&](auto const& list) {
      for (const auto& row : list) {
        std::vector<Position> roles;
        for (int i : row) roles.push_back(static_cast<Position>(i));
        maps.push_back(detail::canonical_roles(schema, roles));
      }
    };
    if (kind == SequenceKind::Training3) add(detail::kCanonicalThree);
    else add(detail::kCanonicalFour);
  } else {
    auto pool = detail::all_canonical_role_maps(schema);
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    maps.assign(pool.begin(), pool.begin() + count);
  }
  std::vector<TrialConfig> out;
  for (int i = 0; i < count; ++i) {
    TrialConfig cfg{schema, maps[i], std::string(to_string(schema)) + "-" + std::to_string(seed) + "-" + std::to_string(i)};
    validate(cfg);
    out.push_back(std::move(cfg));
  }
  return out;
}

}  // namespace openlock
