#pragma once

#include <cstddef>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/kernels.hpp"

namespace coirl {

struct DeterministicPolicy {
  std::vector<std::size_t> actions;

  std::size_t size() const noexcept { return actions.size(); }
  std::size_t operator[](std::size_t s) const { return actions[s]; }
  bool operator==(const DeterministicPolicy&) const = default;
};

struct PlannerConfig {
  double tol = 1e-4;                 ///< stop once ||V_t - V_{t-1}||_inf < tol
  std::size_t max_iters = 100000;
  kernels::Backend backend = kernels::Backend::kAuto;
};

struct PlanResult {
  Vector values;
  DeterministicPolicy policy;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Value iteration with greedy extraction (lowest action index on ties).
/// `warm_start`, when given, replaces the zero initial value function.
/// Throws NonConvergence when max_iters is exhausted.
PlanResult value_iteration(const InstantiatedMDP& mdp, const PlannerConfig& cfg = {},
                           const Vector* warm_start = nullptr);

/// Per-state feature expectations under `policy`: row s is mu^pi(s), the exact solution of
/// mu(s) = phi(s) + gamma * sum_s' P(s'|s,pi(s)) mu(s').
Matrix state_feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy);

/// mu^pi aggregated by `start` (defaults to xi).
Vector feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                            const Vector& start);
Vector feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy);

/// Feature expectations of the uniformly random policy, aggregated by `start`.
Vector uniform_policy_feature_expectations(const InstantiatedMDP& mdp, const Vector& start);

/// Exact V^pi per state for the MDP's reward.
Vector policy_values(const InstantiatedMDP& mdp, const DeterministicPolicy& policy);

/// Normalized discounted state occupancy (1-gamma) sum_t gamma^t Pr(s_t = s) from `start`.
Vector discounted_occupancy(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                            const Vector& start);

/// Q(s,a) = R(s) + gamma * E_{s'} values(s'); n_states x n_actions.
Matrix q_values(const InstantiatedMDP& mdp, const Vector& values);

/// Greedy policy w.r.t. a Q table, lowest index on ties.
DeterministicPolicy greedy_policy(const Matrix& q);

/// psi(s,a) = phi(s) + gamma * E_{s'~P(.|s,a)} mu^pi(s').
class SuccessorFeatures {
 public:
  SuccessorFeatures() = default;
  SuccessorFeatures(std::size_t n_states, std::size_t n_actions, Matrix rows);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t k() const noexcept { return static_cast<std::size_t>(rows_.cols()); }

  auto psi(std::size_t s, std::size_t a) const {
    return rows_.row(static_cast<Eigen::Index>(s * n_actions_ + a));
  }
  /// Q(s,a) = w . psi(s,a) for a feature-space reward weight w; n_states x n_actions.
  Matrix q_for(const Vector& w) const;
  const Matrix& rows() const noexcept { return rows_; }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  Matrix rows_;  // (n_states * n_actions) x k
};

SuccessorFeatures successor_features(const InstantiatedMDP& mdp, const DeterministicPolicy& policy);

}  // namespace coirl
