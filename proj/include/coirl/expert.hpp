#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/geometry.hpp"
#include "coirl/planner.hpp"
#include "coirl/rng.hpp"

namespace coirl {

enum class DemoScheme { kExact, kGeometric, kFixedHorizon };

std::string_view to_string(DemoScheme s);
DemoScheme parse_demo_scheme(std::string_view name);

struct Trajectory {
  std::vector<std::size_t> states;
  std::vector<std::size_t> actions;
};

/// A context with the expert's (exact or estimated) feature expectations.
struct Demonstration {
  Context context;
  DemoScheme scheme = DemoScheme::kExact;
  Trajectory trajectory;  ///< empty for exact demonstrations
  Vector mu;              ///< mu*_c, or the estimate mu_hat built from `trajectory`
};

struct SamplingScheme {
  DemoScheme kind = DemoScheme::kFixedHorizon;
  double eps_h = 1e-3;                  ///< truncation bias target for fixed-horizon
  std::optional<std::size_t> horizon;   ///< explicit H, overrides eps_h
  std::uint64_t rng_seed = 0;

  /// Fixed horizon H, either explicit or ceil(log(1/eps_h) / (1-gamma)).
  std::size_t resolved_horizon(double gamma) const;
};

/// Default demonstration scheme: 40-step expert roll-outs.
inline SamplingScheme default_sampling_scheme() {
  SamplingScheme s;
  s.horizon = 40;
  return s;
}

std::size_t fixed_horizon_length(double gamma, double eps_h);

/// Draws an index from a discrete distribution.
std::size_t sample_index(const Vector& dist, Rng& rng);
std::size_t sample_successor(const TransitionKernel& p, std::size_t s, std::size_t a, Rng& rng);

/// Fixed-length roll-out of H steps (H+1 states) from `start`.
Trajectory rollout(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                   std::size_t start, std::size_t horizon, Rng& rng);

/// Roll-out that continues after each state with probability gamma.
Trajectory geometric_rollout(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                             std::size_t start, Rng& rng);

/// sum_t weight^t phi(s_t) over the trajectory (weight = 1 for the undiscounted sum).
Vector trajectory_feature_sum(const Matrix& features, const Trajectory& traj, double weight);

/// mu_hat for a trajectory recorded under `scheme`.
Vector estimate_feature_expectations(const Matrix& features, double gamma, DemoScheme scheme,
                                     const Trajectory& traj);

/// Simulated expert, optimal for W*; per-context plans are cached.
class Expert {
 public:
  struct Solution {
    Vector context;
    InstantiatedMDP mdp;
    PlanResult plan;
    Vector mu;      ///< mu*_c from xi
    double value;   ///< V*_c = f*(c) . mu*_c
  };

  Expert(ContextualMDP cmdp, Matrix w_star, PlannerConfig cfg = {});

  const ContextualMDP& cmdp() const noexcept { return cmdp_; }
  const Matrix& w_star() const noexcept { return w_star_; }
  const PlannerConfig& planner() const noexcept { return cfg_; }

  std::shared_ptr<const Solution> solve(const Context& c) const;

  Demonstration exact_demonstration(const Context& c) const;
  Demonstration sample_trajectory(const Context& c, const SamplingScheme& scheme, Rng& rng) const;
  Demonstration demonstrate(const Context& c, const SamplingScheme& scheme, Rng& rng) const;

 private:
  ContextualMDP cmdp_;
  Matrix w_star_;
  PlannerConfig cfg_;
  mutable std::mutex mutex_;
  mutable std::unordered_multimap<std::uint64_t, std::shared_ptr<const Solution>> cache_;
};

Demonstration exact_demonstration(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                  const Context& c, const PlannerConfig& cfg = {});

/// Seeded from scheme.rng_seed.
Demonstration sample_trajectory(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                const Context& c, const SamplingScheme& scheme,
                                const PlannerConfig& cfg = {});

/// Radius of the l_inf ball of admissible near-optimal experts, (1-gamma) eps / (8k).
double near_optimal_radius(double eps, double gamma, std::size_t k);

/// Uniform draw from B_inf(W*, radius) intersected with the unit box.
RewardMapping perturb_expert(const RewardMapping& w_star, double eps, double gamma, Rng& rng);

}  // namespace coirl
