#pragma once

// Enumerated causal hypothesis spaces: goal chains, atomic / abstract /
// instantiated schemas, solution structures and prefix pruning.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "openlock/env.hpp"
#include "openlock/graph.hpp"

namespace openlock {

// (fluent before, fluent after) on one binary fluent dimension.
struct CausalRelation {
  std::uint8_t before = 0;
  std::uint8_t after = 0;
  friend constexpr bool operator==(CausalRelation, CausalRelation) = default;
  friend constexpr auto operator<=>(CausalRelation, CausalRelation) = default;
};

// c_i = (a_i, s_i, cr^a_i, cr^s_i). The state node is identified by the
// action's target; its color is the only other attribute. The door has none.
struct Subchain {
  Action action;
  std::optional<Color> color;
  CausalRelation cr_action;  // lever status (or door closed -> open) under the action
  CausalRelation cr_state;   // lock status driven by the previous subchain

  friend bool operator==(const Subchain&, const Subchain&) = default;
};

inline constexpr int kChainLength = 3;

struct CausalChain {
  std::array<Subchain, kChainLength> subchains;

  std::array<Action, kChainLength> actions() const {
    return {subchains[0].action, subchains[1].action, subchains[2].action};
  }
  ActionSequence action_sequence() const {
    return {subchains[0].action, subchains[1].action, subchains[2].action};
  }
};

// Subchain hypothesis for a lever action at chain index 0 or 1, or the door.
inline Subchain make_subchain(Action a, const TrialConfig& trial, int index) {
  Subchain s;
  s.action = a;
  if (a.is_door()) {
    s.cr_action = {0, 1};
    s.cr_state = {static_cast<std::uint8_t>(LockStatus::Locked), static_cast<std::uint8_t>(LockStatus::Unlocked)};
    return s;
  }
  s.color = trial.color_of(a.target.position());
  s.cr_action = a.verb == Verb::Push
                    ? CausalRelation{static_cast<std::uint8_t>(LeverStatus::Pulled), static_cast<std::uint8_t>(LeverStatus::Pushed)}
                    : CausalRelation{static_cast<std::uint8_t>(LeverStatus::Pushed), static_cast<std::uint8_t>(LeverStatus::Pulled)};
  const auto unlocked = static_cast<std::uint8_t>(LockStatus::Unlocked);
  const auto locked = static_cast<std::uint8_t>(LockStatus::Locked);
  s.cr_state = index == 0 ? CausalRelation{unlocked, unlocked} : CausalRelation{locked, unlocked};
  return s;
}

// The levers and verbs chains may range over. The full game uses all seven
// positions and both verbs.
struct LeverUniverse {
  std::vector<Position> positions{kAllPositions.begin(), kAllPositions.end()};
  std::vector<Verb> verbs{Verb::Push, Verb::Pull};

  friend bool operator==(const LeverUniverse&, const LeverUniverse&) = default;
};

// Omega_C restricted to goal chains (lever, other lever, door) with per-chain
// pruning flags. Pruned chains never come back within a trial.
class ChainSpace {
 public:
  ChainSpace() = default;

  ChainSpace(const TrialConfig& trial, const LeverUniverse& universe = {}) : universe_(universe) {
    id_table_.fill(-1);
    for (Position p0 : universe.positions) {
      for (Verb v0 : universe.verbs) {
        for (Position p1 : universe.positions) {
          if (p1 == p0) continue;
          for (Verb v1 : universe.verbs) {
            const Action a0{v0, Target::lever(p0)};
            const Action a1{v1, Target::lever(p1)};
            CausalChain c{{make_subchain(a0, trial, 0), make_subchain(a1, trial, 1),
                           make_subchain(Action::push_door(), trial, 2)}};
            id_table_[a0.index() * kNumActions + a1.index()] = static_cast<int>(chains_.size());
            chains_.push_back(c);
          }
        }
      }
    }
    alive_.assign(chains_.size(), 1);
    alive_count_ = static_cast<int>(chains_.size());
  }

  int size() const { return static_cast<int>(chains_.size()); }
  int alive_count() const { return alive_count_; }
  const CausalChain& chain(int id) const { return chains_.at(id); }
  const std::vector<CausalChain>& chains() const { return chains_; }
  bool alive(int id) const { return alive_.at(id) != 0; }
  const LeverUniverse& universe() const { return universe_; }

  // Chain id of (a0, a1, door), or -1 if not a member.
  int id_of(Action a0, Action a1) const {
    if (a0.is_door() || a1.is_door()) return -1;
    return id_table_[a0.index() * kNumActions + a1.index()];
  }
  int id_of(std::span<const Action> seq) const {
    if (seq.size() != kChainLength || !seq[2].is_door()) return -1;
    return id_of(seq[0], seq[1]);
  }

  static bool has_prefix(const CausalChain& c, std::span<const Action> prefix) {
    if (prefix.size() > kChainLength) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      if (!(c.subchains[i].action == prefix[i])) return false;
    }
    return true;
  }

  // Marks every alive chain starting with `prefix` as pruned; returns how many.
  int prune_prefix(std::span<const Action> prefix) {
    if (prefix.empty()) return 0;
    int pruned = 0;
    for (int id = 0; id < size(); ++id) {
      if (alive_[id] && has_prefix(chains_[id], prefix)) {
        alive_[id] = 0;
        ++pruned;
      }
    }
    alive_count_ -= pruned;
    return pruned;
  }

 private:
  LeverUniverse universe_;
  std::vector<CausalChain> chains_;
  std::vector<std::uint8_t> alive_;
  std::array<int, kNumActions * kNumActions> id_table_{};
  int alive_count_ = 0;
};

inline ChainSpace enumerate_chains(const TrialConfig& trial) { return ChainSpace(trial); }

inline ChainSpace prune_failures(ChainSpace space, std::span<const Action> failed_prefix) {
  space.prune_prefix(failed_prefix);
  return space;
}

// ---------------------------------------------------------------------------
// Atomic schemas

enum class AtomicSchema : std::uint8_t { Chain = 0, CommonCause = 1, CommonEffect = 2 };

inline constexpr std::array<AtomicSchema, 3> kAtomicSchemas = {AtomicSchema::Chain, AtomicSchema::CommonCause,
                                                               AtomicSchema::CommonEffect};

inline std::string_view to_string(AtomicSchema m) {
  switch (m) {
    case AtomicSchema::Chain: return "CHAIN";
    case AtomicSchema::CommonCause: return "CC";
    case AtomicSchema::CommonEffect: return "CE";
  }
  return "?";
}

inline Digraph atomic_graph(AtomicSchema m) {
  Digraph g;
  const int a = g.add_node("A");
  const int b = g.add_node("B");
  const int c = g.add_node("C");
  switch (m) {
    case AtomicSchema::Chain: g.add_edge(a, b); g.add_edge(b, c); break;
    case AtomicSchema::CommonCause: g.add_edge(a, b); g.add_edge(a, c); break;
    case AtomicSchema::CommonEffect: g.add_edge(a, c); g.add_edge(b, c); break;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Abstract schemas
//
// N role-chains (first-lever role, second-lever role, door). Roles are typed
// by slot: a first-lever role never appears as a second-lever role.

struct AbstractSchema {
  int first_roles = 0;   // roles 0 .. first_roles-1 fill slot 0
  int second_roles = 0;  // roles first_roles .. first_roles+second_roles-1 fill slot 1
  std::vector<std::array<int, 2>> chains;

  int num_chains() const { return static_cast<int>(chains.size()); }
  int num_roles() const { return first_roles + second_roles; }

  // Role graph with an edge per chain; optionally the door sink as a last node.
  Digraph role_graph(bool with_door = false) const {
    Digraph g;
    for (int r = 0; r < num_roles(); ++r) g.add_node("R" + std::to_string(r));
    const int door = with_door ? g.add_node("DOOR") : -1;
    for (const auto& c : chains) {
      g.add_edge(c[0], c[1]);
      if (with_door) g.add_edge(c[1], door);
    }
    return g;
  }

  std::string describe() const {
    std::string out;
    for (const auto& c : chains) {
      if (!out.empty()) out += ' ';
      out += "R" + std::to_string(c[0]) + ">R" + std::to_string(c[1]) + ">D";
    }
    return out;
  }

  bool is_common_cause_pattern() const { return first_roles == 1 && second_roles == num_chains(); }
  bool is_common_effect_pattern() const { return second_roles == 1 && first_roles == num_chains(); }

  friend bool operator==(const AbstractSchema&, const AbstractSchema&) = default;
};

namespace detail {

// All set partitions of n labelled cells as restricted growth strings.
inline std::vector<std::vector<int>> restricted_growth_strings(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  auto rec = [&](auto&& self, int i, int max_label) -> void {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
      cur[i] = l;
      self(self, i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return {{}};
  cur[0] = 0;
  rec(rec, 1, 0);
  return out;
}

// Canonical chain list modulo chain order and role renaming within each slot.
inline std::vector<std::array<int, 2>> canonical_chains(std::vector<std::array<int, 2>> chains) {
  std::sort(chains.begin(), chains.end());
  std::vector<std::array<int, 2>> best;
  do {
    std::map<int, int> first, second;
    std::vector<std::array<int, 2>> relabeled;
    for (const auto& c : chains) {
      auto f = first.try_emplace(c[0], static_cast<int>(first.size())).first->second;
      auto s = second.try_emplace(c[1], static_cast<int>(second.size())).first->second;
      relabeled.push_back({f, s});
    }
    std::sort(relabeled.begin(), relabeled.end());
    if (best.empty() || relabeled < best) best = relabeled;
  } while (std::next_permutation(chains.begin(), chains.end()));
  return best;
}

}  // namespace detail

inline constexpr int kMinSolutions = 2;
inline constexpr int kMaxSolutions = 3;

inline std::vector<AbstractSchema> enumerate_abstract_schemas(int n) {
  if (n < kMinSolutions || n > kMaxSolutions) {
    throw ConfigError("abstract schemas are enumerated for 2 or 3 solutions, got " + std::to_string(n));
  }
  std::set<std::vector<std::array<int, 2>>> seen;
  const auto partitions = detail::restricted_growth_strings(n);
  for (const auto& col0 : partitions) {
    for (const auto& col1 : partitions) {
      std::vector<std::array<int, 2>> chains;
      for (int i = 0; i < n; ++i) chains.push_back({col0[i], col1[i]});
      auto sorted = chains;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
      seen.insert(detail::canonical_chains(chains));
    }
  }
  std::vector<AbstractSchema> out;
  for (const auto& chains : seen) {
    AbstractSchema s;
    for (const auto& c : chains) {
      s.first_roles = std::max(s.first_roles, c[0] + 1);
      s.second_roles = std::max(s.second_roles, c[1] + 1);
    }
    for (const auto& c : chains) s.chains.push_back({c[0], s.first_roles + c[1]});
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Instantiated schemas
//
// A binding of every role of an abstract schema to a lever action, injective
// on lever positions. Bindings are identified by the set of chains they
// produce, so role symmetries collapse.

inline constexpr int kMaxRoles = 2 * kMaxSolutions;

struct InstantiatedSchema {
  std::uint16_t abstract_index = 0;
  std::uint8_t size = 0;
  std::uint8_t role_count = 0;
  std::array<std::uint8_t, kMaxSolutions> chains{};  // sorted chain ids
  std::array<std::uint8_t, kMaxRoles> bound{};       // action index bound to each role

  std::span<const std::uint8_t> chain_ids() const { return {chains.data(), size}; }
  std::span<const std::uint8_t> bound_actions() const { return {bound.data(), role_count}; }
  bool contains(int chain_id) const {
    for (int i = 0; i < size; ++i) {
      if (chains[i] == chain_id) return true;
    }
    return false;
  }
  friend bool operator==(const InstantiatedSchema&, const InstantiatedSchema&) = default;
};

// Omega_{g^I} for one solution count over one lever universe. Independent of
// the trial's role map, so it is built once and shared read-only.
class InstantiationSpace {
 public:
  InstantiationSpace(int n, const LeverUniverse& universe)
      : n_(n), universe_(universe), abstract_(enumerate_abstract_schemas(n)) {
    TrialConfig dummy;
    ChainSpace chains(dummy, universe);
    offsets_.push_back(0);
    for (std::size_t ai = 0; ai < abstract_.size(); ++ai) {
      enumerate_for(static_cast<int>(ai), chains);
      offsets_.push_back(static_cast<int>(items_.size()));
      std::array<int, kAtomicSchemas.size()> d{};
      const Digraph g = abstract_[ai].role_graph();
      for (std::size_t m = 0; m < kAtomicSchemas.size(); ++m) d[m] = graph_edit_distance(g, atomic_graph(kAtomicSchemas[m]));
      atomic_distances_.push_back(d);
    }
  }

  int solutions() const { return n_; }
  const LeverUniverse& universe() const { return universe_; }
  const std::vector<AbstractSchema>& abstract_schemas() const { return abstract_; }
  const std::vector<InstantiatedSchema>& items() const { return items_; }
  int size() const { return static_cast<int>(items_.size()); }

  // Instantiations of abstract schema `ai` occupy [begin(ai), end(ai)).
  int begin(int ai) const { return offsets_.at(ai); }
  int end(int ai) const { return offsets_.at(ai + 1); }

  // GED between each abstract schema's lever role graph and each atomic schema.
  const std::vector<std::array<int, 3>>& atomic_distances() const { return atomic_distances_; }

 private:
  void enumerate_for(int ai, const ChainSpace& chains) {
    const AbstractSchema& gA = abstract_[ai];
    const int roles = gA.num_roles();
    const int npos = static_cast<int>(universe_.positions.size());
    std::vector<Action> binding(roles);
    std::vector<bool> used(npos, false);
    std::unordered_set<std::uint32_t> seen;

    auto emit = [&] {
      InstantiatedSchema inst;
      inst.abstract_index = static_cast<std::uint16_t>(ai);
      inst.size = static_cast<std::uint8_t>(gA.num_chains());
      inst.role_count = static_cast<std::uint8_t>(roles);
      for (int r = 0; r < roles; ++r) inst.bound[r] = static_cast<std::uint8_t>(binding[r].index());
      for (int i = 0; i < gA.num_chains(); ++i) {
        const int id = chains.id_of(binding[gA.chains[i][0]], binding[gA.chains[i][1]]);
        inst.chains[i] = static_cast<std::uint8_t>(id);
      }
      std::sort(inst.chains.begin(), inst.chains.begin() + inst.size);
      std::uint32_t key = 0;
      for (int i = 0; i < inst.size; ++i) key = (key << 8) | inst.chains[i];
      if (seen.insert(key).second) items_.push_back(inst);
    };

    auto rec = [&](auto&& self, int r) -> void {
      if (r == roles) {
        emit();
        return;
      }
      for (int pi = 0; pi < npos; ++pi) {
        if (used[pi]) continue;
        used[pi] = true;
        for (Verb v : universe_.verbs) {
          binding[r] = Action{v, Target::lever(universe_.positions[pi])};
          self(self, r + 1);
        }
        used[pi] = false;
      }
    };
    if (chains.size() > 255) throw CapabilityError("instantiation space supports at most 255 chains");
    rec(rec, 0);
  }

  int n_;
  LeverUniverse universe_;
  std::vector<AbstractSchema> abstract_;
  std::vector<InstantiatedSchema> items_;
  std::vector<int> offsets_;
  std::vector<std::array<int, 3>> atomic_distances_;
};

// Shared instantiation space for the full seven-lever game.
inline const InstantiationSpace& standard_instantiations(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<InstantiationSpace>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<InstantiationSpace>(n, LeverUniverse{});
  return *slot;
}

// True if every found solution appears verbatim among the instantiation's chains.
inline bool consistent_with(const InstantiatedSchema& inst, std::span<const int> solution_ids) {
  for (int id : solution_ids) {
    if (id < 0 || !inst.contains(id)) return false;
  }
  return true;
}

inline std::vector<int> solution_ids(const ChainSpace& space, std::span<const ActionSequence> q) {
  std::vector<int> ids;
  for (const auto& seq : q) ids.push_back(space.id_of(seq));
  return ids;
}

// Instantiations of abstract schema `ai` whose trajectories contain every
// solution in q.
inline std::vector<InstantiatedSchema> instantiate_schemas(const InstantiationSpace& space, int ai,
                                                           const ChainSpace& chains,
                                                           std::span<const ActionSequence> q) {
  const auto ids = solution_ids(chains, q);
  std::vector<InstantiatedSchema> out;
  for (int i = space.begin(ai); i < space.end(ai); ++i) {
    if (consistent_with(space.items()[i], ids)) out.push_back(space.items()[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solution structures

inline constexpr const char* kDoorLabel = "DOOR";

// One node per distinct lever in q plus the door; union of a -> b -> door.
inline Digraph solution_structure(std::span<const ActionSequence> q) {
  if (q.empty()) throw std::invalid_argument("solution_structure requires at least one solution");
  Digraph g;
  auto node_for = [&](Target t) {
    const std::string label(to_string(t));
    int i = g.find(label);
    return i >= 0 ? i : g.add_node(label);
  };
  for (const auto& seq : q) {
    if (seq.size() != kChainLength) throw std::invalid_argument("solutions are three-action sequences");
    const int a = node_for(seq[0].target);
    const int b = node_for(seq[1].target);
    const int d = node_for(seq[2].target);
    g.add_edge(a, b);
    g.add_edge(b, d);
  }
  return g;
}

// The lever-only part of a solution structure (door sink removed).
inline Digraph lever_structure(const Digraph& structure) {
  const int door = structure.find(kDoorLabel);
  return door < 0 ? structure : structure.without_node(door);
}

}  // namespace openlock
