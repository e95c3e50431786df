#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "coirl/expert.hpp"
#include "coirl/loss.hpp"
#include "coirl/planner.hpp"

namespace coirl {

/// {x : (x - center)^T Q^{-1} (x - center) <= 1}.
struct EllipsoidState {
  Vector center;
  Matrix Q;

  /// MVEE of the unit l_inf box in R^dim: center 0, Q = dim * I.
  static EllipsoidState initial(std::size_t dim);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(center.size()); }
  double membership(const Vector& x) const;
  /// log det Q via Cholesky; throws NumericalError when Q is not positive definite.
  double log_det() const;
  bool positive_definite() const;
};

/// MVEE of {theta in e : (theta - center)^T a >= 0}.
EllipsoidState mvee_halfspace_update(const EllipsoidState& e, const Vector& a);

/// Upper bound on the per-cut volume ratio, exp(-1/(2(D+1))).
double volume_ratio_bound(std::size_t dim);

/// Coordinate cuts toward the unit box until the center lies inside it.
EllipsoidState clamp_center(const EllipsoidState& e, std::size_t max_cuts = 10000,
                            std::size_t* cuts_applied = nullptr);

struct EllipsoidTraceRow {
  std::size_t round = 0;
  bool cut_applied = false;
  double det_q = 0.0;
  double volume_ratio = 1.0;
  std::size_t suboptimal_count = 0;
  std::optional<double> holdout_rel_value;
};

struct EllipsoidTrace {
  std::vector<EllipsoidTraceRow> rows;
  EllipsoidState final_state;
  std::size_t rounds = 0;
  std::size_t demo_count = 0;          ///< demonstrations revealed by the expert
  std::size_t suboptimal_rounds = 0;
  std::size_t cuts = 0;
  std::size_t clamp_cuts = 0;
  double max_volume_ratio = 0.0;
  double max_membership = 0.0;         ///< worst W* membership seen after any update
  std::vector<Vector> centers;         ///< center after every cut

  void write_csv(std::ostream& os) const;
};

using ContextStream = std::function<Context(std::size_t t)>;
using HoldoutEvaluator = std::function<double(const Matrix& W)>;

struct EllipsoidConfig {
  double eps = 0.1;
  std::size_t max_rounds = 1000;
  /// Stop after this many consecutive rounds without a violation (0: never).
  std::size_t patience = 0;
  PlannerConfig planner;
  std::size_t eval_every = 0;  ///< holdout evaluation cadence in rounds (0: off)
  bool record_every_round = true;
  bool eval_on_cut = false;    ///< also evaluate the holdout right after every cut
};

/// 2 dk (dk + 1) log(4 k sqrt(dk) / ((1-gamma) eps)).
double ellipsoid_cut_bound(std::size_t d, std::size_t k, double gamma, double eps);

/// Algorithm with an exact sub-optimality oracle: plan with the center, cut with
/// c (.) (mu* - mu^pi_hat) whenever V* - V^pi_hat > eps.
EllipsoidTrace run_ellipsoid(const Expert& expert, const ContextStream& contexts,
                             const EllipsoidConfig& cfg, const HoldoutEvaluator& holdout = {});

struct BatchConfig {
  double eps = 0.5;
  double delta = 0.1;
  std::size_t H = 0;
  std::size_t n = 0;
  std::size_t episode_length = 0;  ///< agent steps per round (0: H)
  std::size_t max_rounds = 1000000;
  std::size_t patience = 0;
  std::uint64_t seed = 0;
  PlannerConfig planner;
  bool perturb = true;             ///< draw a near-optimal expert each round

  /// H and n from the theorem's closed forms.
  static BatchConfig theory(std::size_t d, std::size_t k, double gamma, double eps, double delta);
};

std::size_t batch_horizon(std::size_t k, double gamma, double eps);
std::size_t batch_size(std::size_t d, std::size_t k, double gamma, double eps, double delta);
/// n * 2 dk (dk + 1) log(16 k sqrt(dk) / ((1-gamma) eps)).
double batch_round_bound(std::size_t n, std::size_t d, std::size_t k, double gamma, double eps);

/// Batched roll-out variant with near-optimal experts and center clamping.
EllipsoidTrace run_batch_ellipsoid(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                   const ContextStream& contexts, const BatchConfig& cfg,
                                   const HoldoutEvaluator& holdout = {});

/// Learner for the monitored protocol: given the demonstrations revealed so far and the
/// current estimate, returns the next estimate.
using MonitoredRefit = std::function<Matrix(LossEvaluator& demos, const Matrix& W)>;

struct MonitoredConfig {
  double eps = 0.1;
  std::size_t max_rounds = 1000;
  std::size_t patience = 0;
  PlannerConfig planner;
};

struct MonitoredRow {
  std::size_t round = 0;
  std::size_t demos = 0;
  double holdout_rel_value = 0.0;
};

struct MonitoredTrace {
  std::vector<MonitoredRow> rows;  ///< one row at start and one after every demonstration
  Matrix W;
  std::size_t rounds = 0;
  std::size_t demo_count = 0;

  /// Demonstrations revealed before the holdout first reached `target`.
  std::optional<std::size_t> demos_to_reach(double target) const;
};

/// The expert watches every context and demonstrates only when the agent's policy for W is
/// more than eps sub-optimal; the learner then refits on all revealed demonstrations.
MonitoredTrace run_monitored(const Expert& expert, const ContextStream& contexts, Matrix w0,
                             const MonitoredRefit& refit, const MonitoredConfig& cfg,
                             const HoldoutEvaluator& holdout = {});

/// Same count for the ellipsoid trace: demonstrations before the holdout first reached `target`
/// (needs eval_on_cut and an initial evaluation at `initial`).
std::optional<std::size_t> demos_to_reach(const EllipsoidTrace& trace, double initial, double target);

}  // namespace coirl
