#pragma once

// Top-down structure learner: a Dirichlet over atomic schemas that is updated
// between trials, and the belief cascade atomic -> abstract -> instantiated ->
// chain -> subchain conditioned on found solutions q and the current attempt
// prefix tau.

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "openlock/graph.hpp"
#include "openlock/hypothesis.hpp"

namespace openlock {

struct GammaTheory {
  std::array<double, kAtomicSchemas.size()> concentration{1.0, 1.0, 1.0};
  double lambda = 1.0;  // decay rate in exp(-lambda * GED)
};

using ActionWeights = std::array<double, kNumActions>;
using AtomicBelief = std::array<double, kAtomicSchemas.size()>;

inline AtomicBelief atomic_prior(const GammaTheory& gamma) {
  const double total = std::accumulate(gamma.concentration.begin(), gamma.concentration.end(), 0.0);
  AtomicBelief p{};
  for (std::size_t m = 0; m < p.size(); ++m) p[m] = gamma.concentration[m] / total;
  return p;
}

// exp(-lambda * GED) between each atomic schema and the lever part of a
// trial's solution structure.
inline AtomicBelief atomic_increments(const GammaTheory& gamma, const Digraph& structure) {
  const Digraph levers = lever_structure(structure);
  AtomicBelief inc{};
  for (std::size_t m = 0; m < inc.size(); ++m) {
    inc[m] = std::exp(-gamma.lambda * graph_edit_distance(atomic_graph(kAtomicSchemas[m]), levers));
  }
  return inc;
}

inline GammaTheory update_atomic(GammaTheory gamma, const Digraph& structure) {
  const auto inc = atomic_increments(gamma, structure);
  for (std::size_t m = 0; m < inc.size(); ++m) gamma.concentration[m] += inc[m];
  return gamma;
}

// p(g^A; gamma) = sum_m p(g^A | m) p(m), with p(g^A | m) proportional to
// exp(-lambda * GED(g^A, m)) over the abstract space.
inline std::vector<double> abstract_belief(const GammaTheory& gamma,
                                           std::span<const std::array<int, 3>> distances) {
  const auto prior = atomic_prior(gamma);
  std::vector<double> out(distances.size(), 0.0);
  for (std::size_t m = 0; m < prior.size(); ++m) {
    double z = 0.0;
    for (const auto& d : distances) z += std::exp(-gamma.lambda * d[m]);
    for (std::size_t a = 0; a < distances.size(); ++a) {
      out[a] += prior[m] * std::exp(-gamma.lambda * distances[a][m]) / z;
    }
  }
  return out;
}

inline std::vector<double> abstract_belief(const GammaTheory& gamma, const InstantiationSpace& space) {
  return abstract_belief(gamma, space.atomic_distances());
}

// Probability mass over a subset of an enumerated space.
struct SparseBelief {
  std::vector<int> ids;
  std::vector<double> p;

  bool empty() const { return ids.empty(); }
  double sum() const { return std::accumulate(p.begin(), p.end(), 0.0); }
};

namespace detail {

inline bool instantiation_alive(const InstantiatedSchema& inst, const ChainSpace& chains) {
  for (int i = 0; i < inst.size; ++i) {
    if (!chains.alive(inst.chains[i])) return false;
  }
  return true;
}

// Per-action weights for role bindings. A null pointer means uniform.
inline double binding_weight(const InstantiatedSchema& inst, const ActionWeights* weights) {
  if (!weights) return 1.0;
  double w = 1.0;
  for (std::uint8_t a : inst.bound_actions()) w *= (*weights)[a];
  return w;
}

// Mixture over surviving instantiations. Each abstract schema splits its
// belief over the instantiations consistent with q in proportion to the
// binding weight (uniformly when no weights are given); instantiations with a
// pruned chain are then dropped and the mixture is renormalized, so a schema
// loses belief as its instantiations are refuted.
inline SparseBelief mix_instantiations(const InstantiationSpace& space, std::span<const double> abstract,
                                       std::span<const int> consistent, std::span<const int> survivors,
                                       const ActionWeights* weights = nullptr) {
  std::vector<double> per_abstract(space.abstract_schemas().size(), 0.0);
  for (int id : consistent) {
    const auto& inst = space.items()[id];
    per_abstract[inst.abstract_index] += binding_weight(inst, weights);
  }
  SparseBelief out;
  out.ids.reserve(survivors.size());
  out.p.reserve(survivors.size());
  double z = 0.0;
  for (int id : survivors) {
    const auto& inst = space.items()[id];
    const double w = binding_weight(inst, weights);
    if (w <= 0.0 || per_abstract[inst.abstract_index] <= 0.0) continue;
    const double p = abstract[inst.abstract_index] * w / per_abstract[inst.abstract_index];
    if (p <= 0.0) continue;
    out.ids.push_back(id);
    out.p.push_back(p);
    z += p;
  }
  if (z <= 0.0) return {};
  for (double& v : out.p) v /= z;
  return out;
}

}  // namespace detail

// p(g^I | do(q); gamma) by a full scan of the space. Instantiations that miss
// a found solution or contain a pruned chain get no mass.
inline SparseBelief instantiated_belief(const InstantiationSpace& space, std::span<const double> abstract,
                                        const ChainSpace& chains, std::span<const int> q_ids,
                                        const ActionWeights* weights = nullptr) {
  std::vector<int> consistent, survivors;
  for (int i = 0; i < space.size(); ++i) {
    const auto& inst = space.items()[i];
    if (!consistent_with(inst, q_ids)) continue;
    consistent.push_back(i);
    if (detail::instantiation_alive(inst, chains)) survivors.push_back(i);
  }
  return detail::mix_instantiations(space, abstract, consistent, survivors, weights);
}

// p(c | do(q); gamma) indexed by chain id. Within an instantiation the mass is
// uniform over its trajectories that are not already solutions.
inline std::vector<double> chain_belief(const InstantiationSpace& space, const SparseBelief& instantiated,
                                        const ChainSpace& chains, std::span<const int> q_ids) {
  std::vector<double> out(chains.size(), 0.0);
  auto found = [&](int id) { return std::find(q_ids.begin(), q_ids.end(), id) != q_ids.end(); };
  double z = 0.0;
  for (std::size_t k = 0; k < instantiated.ids.size(); ++k) {
    const auto& inst = space.items()[instantiated.ids[k]];
    int remaining = 0;
    for (int i = 0; i < inst.size; ++i) remaining += found(inst.chains[i]) ? 0 : 1;
    if (remaining == 0) continue;
    const double w = instantiated.p[k] / remaining;
    for (int i = 0; i < inst.size; ++i) {
      if (found(inst.chains[i])) continue;
      out[inst.chains[i]] += w;
      z += w;
    }
  }
  if (z > 0.0) {
    for (double& v : out) v /= z;
  }
  return out;
}

struct SubchainMass {
  Subchain subchain;
  double mass = 0.0;
};

// p(c_i | do(tau, q); gamma): chains whose first |tau| actions match tau vote
// for their subchain at index |tau|. Entries are ordered by action index.
inline std::vector<SubchainMass> subchain_belief(const ChainSpace& chains, std::span<const double> chain_probs,
                                                 std::span<const Action> tau) {
  std::vector<SubchainMass> out;
  if (tau.size() >= kChainLength) return out;
  std::array<double, kNumActions> mass{};
  std::array<int, kNumActions> example{};
  example.fill(-1);
  double z = 0.0;
  for (int id = 0; id < chains.size(); ++id) {
    if (chain_probs[id] <= 0.0 || !chains.alive(id)) continue;
    const auto& c = chains.chain(id);
    if (!ChainSpace::has_prefix(c, tau)) continue;
    const int a = c.subchains[tau.size()].action.index();
    mass[a] += chain_probs[id];
    example[a] = id;
    z += chain_probs[id];
  }
  if (z <= 0.0) return out;
  for (int a = 0; a < kNumActions; ++a) {
    if (example[a] < 0) continue;
    out.push_back({chains.chain(example[a]).subchains[tau.size()], mass[a] / z});
  }
  return out;
}

// Incremental view of the surviving instantiations for one trial. Survivors
// only ever shrink as solutions are found and chains are pruned, so each
// update filters the current list instead of rescanning the space.
class SchemaTracker {
 public:
  SchemaTracker(const InstantiationSpace& space, std::vector<double> abstract)
      : space_(&space), abstract_(std::move(abstract)) {
    consistent_.resize(space.size());
    std::iota(consistent_.begin(), consistent_.end(), 0);
    survivors_ = consistent_;
  }

  // Drops instantiations that contain a pruned chain or miss a found solution.
  void filter(const ChainSpace& chains, std::span<const int> q_ids) {
    std::erase_if(consistent_, [&](int id) { return !consistent_with(space_->items()[id], q_ids); });
    std::erase_if(survivors_, [&](int id) {
      const auto& inst = space_->items()[id];
      return !consistent_with(inst, q_ids) || !detail::instantiation_alive(inst, chains);
    });
  }

  // Recomputes the instantiated and chain beliefs over the current survivors.
  void update(const ChainSpace& chains, std::span<const int> q_ids, const ActionWeights* weights = nullptr) {
    instantiated_ = detail::mix_instantiations(*space_, abstract_, consistent_, survivors_, weights);
    chain_ = openlock::chain_belief(*space_, instantiated_, chains, q_ids);
  }

  void refresh(const ChainSpace& chains, std::span<const int> q_ids, const ActionWeights* weights = nullptr) {
    filter(chains, q_ids);
    update(chains, q_ids, weights);
  }

  const InstantiationSpace& space() const { return *space_; }
  const std::vector<double>& abstract() const { return abstract_; }
  const SparseBelief& instantiated() const { return instantiated_; }
  const std::vector<double>& chains() const { return chain_; }
  int survivor_count() const { return static_cast<int>(survivors_.size()); }

 private:
  const InstantiationSpace* space_;
  std::vector<double> abstract_;
  std::vector<int> consistent_;
  std::vector<int> survivors_;
  SparseBelief instantiated_;
  std::vector<double> chain_;
};

}  // namespace openlock
