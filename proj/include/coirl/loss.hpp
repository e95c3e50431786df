#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/expert.hpp"
#include "coirl/kernels.hpp"
#include "coirl/planner.hpp"
#include "coirl/rng.hpp"

namespace coirl {

struct LossReport {
  double value = 0.0;
  std::vector<std::pair<Context, double>> per_context;
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;  ///< d x k
};

/// The agent's best response to W in context c and its feature expectations from xi.
struct AgentResponse {
  PlanResult plan;
  Vector mu;
};

AgentResponse best_response(const InstantiatedMDP& mdp, const PlannerConfig& cfg,
                            const Vector* warm_start = nullptr);

/// Loss and subgradient over a fixed demonstration set. Per-demo MDPs are instantiated
/// once; W only changes the reward. Evaluations over demos run on `backend`.
class LossEvaluator {
 public:
  LossEvaluator(ContextualMDP cmdp, std::vector<Demonstration> demos, PlannerConfig cfg = {},
                kernels::Backend backend = kernels::Backend::kAuto);

  const ContextualMDP& cmdp() const noexcept { return cmdp_; }
  const std::vector<Demonstration>& demos() const noexcept { return demos_; }
  std::size_t size() const noexcept { return demos_.size(); }

  /// Appends a demonstration (online protocols grow the set over time).
  void add(Demonstration demo);

  /// f_W(c) . (mu^{pi_hat_c(W)} - mu_hat_c) for demo i.
  double term(const Matrix& W, std::size_t i) const;
  /// c (.) (mu^{pi_hat_c(W)} - mu_hat_c) reshaped d x k, with the matching loss term.
  LossAndGradient term_and_subgradient(const Matrix& W, std::size_t i) const;

  LossReport loss(const Matrix& W) const;
  double value(const Matrix& W) const;
  LossAndGradient loss_and_subgradient(const Matrix& W) const;
  LossAndGradient loss_and_subgradient(const Matrix& W, std::span<const std::size_t> subset) const;

  /// Stores value functions at W; later plans start from them (useful for nearby W).
  void set_warm_start(const Matrix& W);
  void clear_warm_start() { warm_.clear(); }

  /// Stores each demo's best response at W with its successor features. Later calls reuse a
  /// stored policy whenever it is still greedy w.r.t. its own Q under the new reward, which
  /// makes it optimal; otherwise they plan from scratch.
  void set_policy_cache(const Matrix& W);
  void clear_policy_cache() { cached_.clear(); }

 private:
  AgentResponse respond(const Matrix& W, std::size_t i) const;

  ContextualMDP cmdp_;
  std::vector<Demonstration> demos_;
  std::vector<InstantiatedMDP> mdps_;
  PlannerConfig cfg_;
  kernels::Backend backend_;
  std::vector<Vector> warm_;
  struct CachedResponse {
    DeterministicPolicy policy;
    SuccessorFeatures sf;
    Vector mu;
  };
  std::vector<CachedResponse> cached_;
};

/// Loss(W) over `demos` (exact or estimated mu payloads).
LossReport coirl_loss(const ContextualMDP& cmdp, const Matrix& W,
                      std::span<const Demonstration> demos, const PlannerConfig& cfg = {},
                      kernels::Backend backend = kernels::Backend::kAuto);

/// Stochastic subgradient for a single demonstration.
Matrix subgradient(const ContextualMDP& cmdp, const Matrix& W, const Demonstration& demo,
                   const PlannerConfig& cfg = {});

/// Averaged subgradient over a batch.
Matrix subgradient(const ContextualMDP& cmdp, const Matrix& W, std::span<const Demonstration> demos,
                   const PlannerConfig& cfg = {}, kernels::Backend backend = kernels::Backend::kAuto);

struct ESConfig {
  std::size_t m = 250;
  double rho = 1.0;
  double nu = 1e-3;
  bool centered = true;
  std::uint64_t rng_seed = 0;
  kernels::Backend backend = kernels::Backend::kAuto;

  void validate() const;
};

using LossFunction = std::function<double(const Matrix&)>;

/// g = (1/(m rho)) sum_j L(W + nu u_j) nu u_j with u_j = z_j/||z_j||, z_j ~ N(0, rho^2 I).
/// With `centered`, L(W + nu u_j) - L(W) replaces L(W + nu u_j). Perturbations are drawn
/// serially from `rng`; the m loss evaluations run on cfg.backend.
Matrix es_gradient(const LossFunction& loss, const Matrix& W, const ESConfig& cfg, Rng& rng);

/// As above on the COIRL loss, seeded from cfg.rng_seed.
Matrix es_gradient(const LossEvaluator& loss, const Matrix& W, const ESConfig& cfg);

}  // namespace coirl
