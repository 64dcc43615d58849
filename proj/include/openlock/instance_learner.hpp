#pragma once

// Bottom-up associative learner. Dirichlet beliefs over lever position,
// lever color and grounded action count how often each category took part in
// a causal event. A global set persists across trials; a local set is
// rescaled from it at every trial start and adapts within the trial.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "openlock/env.hpp"
#include "openlock/hypothesis.hpp"

namespace openlock {

inline constexpr double kLocalAlphaMin = 1.0;
inline constexpr double kLocalAlphaMax = 10.0;

struct DirichletBelief {
  std::vector<double> alpha;

  DirichletBelief() = default;
  explicit DirichletBelief(std::size_t categories, double init = 1.0) : alpha(categories, init) {}

  std::size_t size() const { return alpha.size(); }
  double total() const {
    double t = 0.0;
    for (double a : alpha) t += a;
    return t;
  }
  double max() const { return *std::max_element(alpha.begin(), alpha.end()); }
  std::vector<double> mean() const {
    std::vector<double> m(alpha.size());
    const double t = total();
    for (std::size_t i = 0; i < alpha.size(); ++i) m[i] = alpha[i] / t;
    return m;
  }
  template <class Rng>
  std::vector<double> sample(Rng& rng) const {
    std::vector<double> x(alpha.size());
    double t = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      std::gamma_distribution<double> g(alpha[i], 1.0);
      x[i] = g(rng);
      t += x[i];
    }
    for (double& v : x) v /= t;
    return x;
  }
};

enum class LikelihoodMode { Sample, Mean };

enum class BetaDimension : int { Position = 0, Color = 1, Action = 2 };
inline constexpr int kBetaDimensions = 3;

inline std::string_view to_string(BetaDimension d) {
  switch (d) {
    case BetaDimension::Position: return "position";
    case BetaDimension::Color: return "color";
    case BetaDimension::Action: return "action";
  }
  return "?";
}

struct BetaTheory {
  std::array<DirichletBelief, kBetaDimensions> global{
      DirichletBelief(kNumLevers), DirichletBelief(2), DirichletBelief(kNumActions)};
  std::array<DirichletBelief, kBetaDimensions> local{
      DirichletBelief(kNumLevers), DirichletBelief(2), DirichletBelief(kNumActions)};
  std::array<double, kBetaDimensions> scale{1.0, 1.0, 1.0};
  LikelihoodMode mode = LikelihoodMode::Sample;

  const DirichletBelief& global_of(BetaDimension d) const { return global[static_cast<int>(d)]; }
  const DirichletBelief& local_of(BetaDimension d) const { return local[static_cast<int>(d)]; }
};

// Local beliefs become clamp(k * global) with k = 10 / max(global), per belief.
inline BetaTheory begin_trial(BetaTheory beta) {
  for (int d = 0; d < kBetaDimensions; ++d) {
    const double k = kLocalAlphaMax / beta.global[d].max();
    beta.scale[d] = k;
    beta.local[d].alpha.resize(beta.global[d].size());
    for (std::size_t i = 0; i < beta.global[d].size(); ++i) {
      beta.local[d].alpha[i] = std::clamp(k * beta.global[d].alpha[i], kLocalAlphaMin, kLocalAlphaMax);
    }
  }
  return beta;
}

// Counts a causal event against the acted-on entity. Events with no
// transitions leave the theory untouched.
inline BetaTheory observe(BetaTheory beta, const CausalEvent& event, const TrialConfig& trial) {
  if (event.empty()) return beta;
  auto bump = [&](int d, std::size_t category) {
    beta.global[d].alpha[category] += 1.0;
    beta.local[d].alpha[category] = std::clamp(beta.local[d].alpha[category] + 1.0, kLocalAlphaMin, kLocalAlphaMax);
  };
  bump(static_cast<int>(BetaDimension::Action), static_cast<std::size_t>(event.action.index()));
  if (!event.action.is_door()) {
    const Position p = event.action.target.position();
    bump(static_cast<int>(BetaDimension::Position), static_cast<std::size_t>(index_of(p)));
    bump(static_cast<int>(BetaDimension::Color), static_cast<std::size_t>(trial.color_of(p)));
  }
  return beta;
}

// Multinomial parameters drawn from (or averaged over) the local beliefs.
struct LikelihoodParams {
  std::array<std::vector<double>, kBetaDimensions> theta;
};

inline LikelihoodParams mean_parameters(const BetaTheory& beta) {
  LikelihoodParams p;
  for (int d = 0; d < kBetaDimensions; ++d) p.theta[d] = beta.local[d].mean();
  return p;
}

template <class Rng>
LikelihoodParams likelihood_parameters(const BetaTheory& beta, Rng& rng) {
  if (beta.mode == LikelihoodMode::Mean) return mean_parameters(beta);
  LikelihoodParams p;
  for (int d = 0; d < kBetaDimensions; ++d) p.theta[d] = beta.local[d].sample(rng);
  return p;
}

// p(rho_i | c_i; beta) up to a constant: the action term times one term per
// attribute of the acted-on lever. The door carries no lever attributes.
inline double subchain_likelihood(const LikelihoodParams& params, const Subchain& c) {
  double p = params.theta[static_cast<int>(BetaDimension::Action)][c.action.index()];
  if (!c.action.is_door()) {
    p *= params.theta[static_cast<int>(BetaDimension::Position)][index_of(c.action.target.position())];
    if (c.color) p *= params.theta[static_cast<int>(BetaDimension::Color)][static_cast<int>(*c.color)];
  }
  return p;
}

inline double subchain_likelihood(const BetaTheory& beta, const Subchain& c) {
  return subchain_likelihood(mean_parameters(beta), c);
}

inline double chain_likelihood(const LikelihoodParams& params, const CausalChain& c) {
  double p = 1.0;
  for (const auto& s : c.subchains) p *= subchain_likelihood(params, s);
  return p;
}

inline double chain_likelihood(const BetaTheory& beta, const CausalChain& c) {
  return chain_likelihood(mean_parameters(beta), c);
}

}  // namespace openlock
