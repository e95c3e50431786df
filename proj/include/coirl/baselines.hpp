#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/planner.hpp"

namespace coirl {

/// Distribution over deterministic policies, sampled once at time 0.
struct MixedPolicy {
  std::vector<std::pair<DeterministicPolicy, double>> components;

  /// sum_i weight_i mu(pi_i) from the MDP's start distribution.
  Vector feature_expectations(const InstantiatedMDP& mdp) const;
  void validate() const;
};

/// Contexts folded into the state: |C| disconnected copies with features c (.) phi(s).
struct LargeMDP {
  InstantiatedMDP mdp;  ///< k = dk features, start = uniform over contexts times xi
  std::vector<Context> contexts;
  std::size_t base_states = 0;
};

LargeMDP build_large_mdp(const ContextualMDP& cmdp, std::span<const Context> contexts);

/// Feature expectations on the large MDP of playing, in each copy j, the policy policies[j].
Vector stacked_feature_expectations(const LargeMDP& large, std::span<const DeterministicPolicy> policies);

struct ALResult {
  MixedPolicy policy;
  std::vector<Vector> w_trace;
  std::vector<double> distance;  ///< ||mu_bar_t - mu_E||_2, t = 0..iterations
  Vector mu_bar;
  std::size_t iterations = 0;
  std::vector<double> iteration_ms;  ///< wall time of each projection step
};

/// Projection variant of apprenticeship learning. Stops after T iterations or when the
/// distance drops to `tol`.
ALResult al_projection(const InstantiatedMDP& mdp, const Vector& mu_e, std::size_t T,
                       double tol = 1e-6, const PlannerConfig& cfg = {});

struct MWALResult {
  MixedPolicy policy;
  std::vector<Vector> w_trace;
  Vector mu_mix;
  double step = 0.0;
};

/// Multiplicative-weights apprenticeship learning: weights over the simplex of features,
/// best-response policy player, uniform mixture output.
MWALResult mwal(const InstantiatedMDP& mdp, const Vector& mu_e, std::size_t T,
                const PlannerConfig& cfg = {});

/// sqrt(log k') (2/(1-gamma)) sqrt(2/T): regret of the weight player per round.
double mwal_bound(std::size_t k_prime, double gamma, std::size_t T);

enum class BCFeatureMap {
  kConcat,        ///< [c, phi(s), 1]
  kStateContext,  ///< [c (x) e_s, e_s]: a separate linear context model per state
};

std::string_view to_string(BCFeatureMap m);
BCFeatureMap parse_bc_feature_map(std::string_view name);

struct BCSample {
  Context context;
  std::size_t state;
  std::size_t action;
};

struct BCModel {
  Matrix weights;  ///< n_actions x n_inputs
  BCFeatureMap feature_map = BCFeatureMap::kConcat;
  std::uint64_t seed = 0;

  std::size_t n_actions() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

std::size_t bc_input_size(BCFeatureMap map, std::size_t d, std::size_t k, std::size_t n_states);
Vector bc_features(BCFeatureMap map, const Matrix& phi, const Context& c, std::size_t s);

struct BCConfig {
  BCFeatureMap feature_map = BCFeatureMap::kConcat;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.5;
  double decay = 0.99;   ///< per-epoch multiplicative decay
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

BCModel bc_zero_model(BCFeatureMap map, const Matrix& phi, std::size_t d, std::size_t n_actions);

/// Mini-batch gradient descent on the mean cross-entropy (+ l2/2 ||weights||^2).
BCModel bc_train(std::span<const BCSample> data, const Matrix& phi, std::size_t n_actions,
                 const BCConfig& cfg);

/// Softmax action distribution.
Vector bc_predict(const BCModel& model, const Matrix& phi, const Context& c, std::size_t s);
std::size_t bc_greedy(const BCModel& model, const Matrix& phi, const Context& c, std::size_t s);
DeterministicPolicy bc_policy(const BCModel& model, const Matrix& phi, const Context& c);

/// Mean cross-entropy plus l2 term, with its gradient w.r.t. the weights.
double bc_loss(const BCModel& model, std::span<const BCSample> data, const Matrix& phi, double l2,
               Matrix* gradient = nullptr);

double bc_accuracy(const BCModel& model, std::span<const BCSample> data, const Matrix& phi);

}  // namespace coirl
