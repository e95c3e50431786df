#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "coirl/expert.hpp"
#include "coirl/geometry.hpp"
#include "coirl/loss.hpp"

namespace coirl {

struct GeometryConstants {
  Geometry geometry;
  double sigma = 1.0;
  double D = 0.0;
  double L = 0.0;
  double gamma = 0.0;
  std::size_t dk = 0;

  /// Theory step size alpha_t, t >= 1.
  double alpha(std::size_t t) const;
  /// D L sqrt(2 / (sigma T)).
  double mda_bound(std::size_t T) const;
  /// Constant ES step D / ((dk + 4) sqrt(T + 1) L).
  double es_alpha(std::size_t T) const;
  /// Iterations for ES to reach eps: 4 (dk+4)^2 D^2 L^2 / eps^2.
  double es_iterations(double eps) const;
};

/// Closed forms for the ball (PSGD) and simplex (EW) geometries.
GeometryConstants theory_constants(std::size_t d, std::size_t k, double gamma, Geometry g);

/// W_1: zero for the ball, uniform for the simplex, zero for the box.
Matrix initial_iterate(std::size_t d, std::size_t k, Geometry g);

/// One mirror-descent step. Ball: W - alpha g, renormalized to the unit sphere.
/// Simplex: multiplicative update in log space. Box: gradient step then clipping.
Matrix mda_step(const Matrix& W, const Matrix& g, double alpha, Geometry geometry);

struct TraceRow {
  std::size_t step = 0;
  double alpha = 0.0;
  double grad_norm = 0.0;
  std::optional<double> loss;
  std::optional<double> rel_value;
  std::optional<double> accuracy;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  Matrix w_avg;
  Matrix w_last;
  Matrix w_best;
  double best_loss = 0.0;

  void write_csv(std::ostream& os) const;
};

/// Metrics evaluated at a checkpoint for the current output iterate.
struct CheckpointMetrics {
  std::optional<double> loss;
  std::optional<double> rel_value;
  std::optional<double> accuracy;
};
using Checkpoint = std::function<CheckpointMetrics(std::size_t step, const Matrix& W)>;

/// Stochastic (sub)gradient at step t (1-based) for iterate W.
using GradientOracle = std::function<LossAndGradient(std::size_t t, const Matrix& W)>;
using DemoSource = std::function<Demonstration(std::size_t t)>;
using StepSchedule = std::function<double(std::size_t t)>;

struct MDAConfig {
  Geometry geometry = Geometry::kEuclideanBall;
  std::size_t T = 100;
  std::size_t eval_every = 10;  ///< 0 disables checkpoints
  StepSchedule schedule;        ///< empty: theory alpha_t
  std::optional<Matrix> w1;     ///< empty: initial_iterate
};

TrainTrace run_mda(std::size_t d, std::size_t k, double gamma, const GradientOracle& oracle,
                   const MDAConfig& cfg, const Checkpoint& checkpoint = {});

/// One demonstration per step, subgradient from that demonstration alone.
TrainTrace run_mda(const ContextualMDP& cmdp, const DemoSource& demos, const MDAConfig& cfg,
                   const PlannerConfig& planner = {}, const Checkpoint& checkpoint = {});

struct ESTrainConfig {
  Geometry geometry = Geometry::kEuclideanBall;
  std::size_t T = 50;
  ESConfig es;
  StepSchedule schedule;          ///< empty: constant theory step
  bool normalize_step = false;    ///< scale the step direction to unit l2 norm
  bool accept_if_decrease = false;
  std::size_t eval_every = 10;
  std::optional<Matrix> w1;
};

/// Maps a point back into the geometry after an ES step (ball: onto the sphere).
Matrix es_project(const Matrix& W, Geometry g);

struct ESStep {
  Matrix W;
  double loss;        ///< loss at the returned W
  double grad_norm;
  bool accepted;
};

/// One ES update from W (with known loss `current`) using step size alpha.
ESStep es_step(const LossFunction& loss, const Matrix& W, double current, double alpha,
               const ESTrainConfig& cfg, Rng& rng);

/// ES on a fixed loss; returns the best evaluated iterate as w_best.
TrainTrace run_es(const LossFunction& loss, std::size_t d, std::size_t k, double gamma,
                  const ESTrainConfig& cfg, const Checkpoint& checkpoint = {});

/// Refit used by PSGD in the monitored protocol. Each refit runs `epochs` passes over the
/// revealed demonstrations in random order with alpha_e = inner_decay^e alpha_{e-1}; a step on
/// demo i uses g / ||g||_inf and is kept only if it lowers that demo's loss term. The starting
/// step shrinks by outer_decay per demonstration. Iterates live on the unit sphere.
struct MonitoredPSGDConfig {
  double alpha0 = 0.3;
  double inner_decay = 0.9;
  double outer_decay = 0.94;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
};

std::function<Matrix(LossEvaluator&, const Matrix&)> make_psgd_refit(const MonitoredPSGDConfig& cfg);

/// Refit used by ES in the monitored protocol: cfg.T ES steps on the full revealed set starting
/// from the current estimate, returning the best iterate.
std::function<Matrix(LossEvaluator&, const Matrix&)> make_es_refit(const ESTrainConfig& cfg);

}  // namespace coirl
