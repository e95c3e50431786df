#include "coirl/descent.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "coirl/error.hpp"

namespace coirl {

double GeometryConstants::alpha(std::size_t t) const {
  if (t == 0) throw InvalidArgument("step index starts at 1");
  return D / L * std::sqrt(2.0 * sigma / static_cast<double>(t));
}

double GeometryConstants::mda_bound(std::size_t T) const {
  return D * L * std::sqrt(2.0 / (sigma * static_cast<double>(T)));
}

double GeometryConstants::es_alpha(std::size_t T) const {
  return D / ((static_cast<double>(dk) + 4.0) * std::sqrt(static_cast<double>(T) + 1.0) * L);
}

double GeometryConstants::es_iterations(double eps) const {
  const double a = static_cast<double>(dk) + 4.0;
  return 4.0 * a * a * D * D * L * L / (eps * eps);
}

GeometryConstants theory_constants(std::size_t d, std::size_t k, double gamma, Geometry g) {
  if (d == 0 || k == 0) throw InvalidArgument("d and k must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  GeometryConstants c;
  c.geometry = g;
  c.gamma = gamma;
  c.dk = d * k;
  const double dk = static_cast<double>(c.dk);
  switch (g) {
    case Geometry::kEuclideanBall:
      c.D = 1.0;
      c.L = 2.0 * std::sqrt(dk) / (1.0 - gamma);
      break;
    case Geometry::kSimplex:
      if (c.dk < 2) throw InvalidArgument("the simplex geometry needs dk >= 2");
      c.D = std::sqrt(std::log(dk));
      c.L = 2.0 / (1.0 - gamma);
      break;
    case Geometry::kLinfBox:
      throw InvalidArgument("no mirror-descent constants for the box geometry");
  }
  return c;
}

Matrix initial_iterate(std::size_t d, std::size_t k, Geometry g) {
  const auto r = static_cast<Eigen::Index>(d), c = static_cast<Eigen::Index>(k);
  if (g == Geometry::kSimplex) return Matrix::Constant(r, c, 1.0 / static_cast<double>(d * k));
  return Matrix::Zero(r, c);
}

Matrix mda_step(const Matrix& W, const Matrix& g, double alpha, Geometry geometry) {
  if (W.rows() != g.rows() || W.cols() != g.cols()) throw InvalidArgument("gradient shape != W shape");
  if (!g.allFinite()) throw DegenerateStep("non-finite gradient");
  switch (geometry) {
    case Geometry::kEuclideanBall: {
      Matrix next = W - alpha * g;
      const double norm = next.norm();
      if (norm == 0.0) throw DegenerateStep("ball step produced the zero matrix");
      return next / norm;
    }
    case Geometry::kSimplex: {
      Matrix logits(W.rows(), W.cols());
      for (Eigen::Index i = 0; i < W.size(); ++i) {
        logits(i) = W(i) > 0.0 ? std::log(W(i)) - alpha * g(i) : -std::numeric_limits<double>::infinity();
      }
      const double top = logits.maxCoeff();
      if (!std::isfinite(top)) throw DegenerateStep("simplex iterate lost all mass");
      Matrix next = (logits.array() - top).exp().matrix();
      return next / next.sum();
    }
    case Geometry::kLinfBox:
      return project(W - alpha * g, Geometry::kLinfBox);
  }
  return W;
}

void TrainTrace::write_csv(std::ostream& os) const {
  const auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << std::setprecision(10) << "step,alpha,grad_norm,loss,rel_value,accuracy\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.alpha << ',' << r.grad_norm << ',';
    opt(r.loss);
    os << ',';
    opt(r.rel_value);
    os << ',';
    opt(r.accuracy);
    os << '\n';
  }
}

namespace {

void apply_checkpoint(const Checkpoint& cb, std::size_t step, const Matrix& W, TraceRow& row) {
  if (!cb) return;
  const auto m = cb(step, W);
  row.loss = m.loss;
  row.rel_value = m.rel_value;
  row.accuracy = m.accuracy;
}

}  // namespace

TrainTrace run_mda(std::size_t d, std::size_t k, double gamma, const GradientOracle& oracle,
                   const MDAConfig& cfg, const Checkpoint& checkpoint) {
  if (cfg.T == 0) throw InvalidArgument("T must be at least 1");
  StepSchedule schedule = cfg.schedule;
  if (!schedule) {
    const auto constants = theory_constants(d, k, gamma, cfg.geometry);
    schedule = [constants](std::size_t t) { return constants.alpha(t); };
  }
  Matrix W = cfg.w1 ? *cfg.w1 : initial_iterate(d, k, cfg.geometry);
  Matrix sum = Matrix::Zero(W.rows(), W.cols());
  TrainTrace trace;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const auto lg = oracle(t, W);
    const double alpha = schedule(t);
    sum += W;
    TraceRow row;
    row.step = t;
    row.alpha = alpha;
    row.grad_norm = lg.gradient.norm();
    // a zero gradient at the zero start leaves nothing to normalize
    const bool stuck = cfg.geometry == Geometry::kEuclideanBall && W.norm() == 0.0 && row.grad_norm == 0.0;
    if (!stuck) W = mda_step(W, lg.gradient, alpha, cfg.geometry);
    if (cfg.eval_every > 0 && (t % cfg.eval_every == 0 || t == cfg.T)) {
      apply_checkpoint(checkpoint, t, sum / static_cast<double>(t), row);
    }
    trace.rows.push_back(row);
  }
  trace.w_avg = sum / static_cast<double>(cfg.T);
  trace.w_last = W;
  trace.w_best = trace.w_avg;
  trace.best_loss = trace.rows.back().loss.value_or(std::numeric_limits<double>::quiet_NaN());
  return trace;
}

TrainTrace run_mda(const ContextualMDP& cmdp, const DemoSource& demos, const MDAConfig& cfg,
                   const PlannerConfig& planner, const Checkpoint& checkpoint) {
  const GradientOracle oracle = [&](std::size_t t, const Matrix& W) {
    LossEvaluator one(cmdp, {demos(t)}, planner, kernels::Backend::kSerial);
    return one.term_and_subgradient(W, 0);
  };
  return run_mda(cmdp.d(), cmdp.k(), cmdp.gamma(), oracle, cfg, checkpoint);
}

Matrix es_project(const Matrix& W, Geometry g) {
  if (g == Geometry::kEuclideanBall) {
    const double norm = W.norm();
    if (norm == 0.0) throw DegenerateStep("ES iterate collapsed to zero");
    return W / norm;
  }
  return project(W, g);
}

ESStep es_step(const LossFunction& loss, const Matrix& W, double current, double alpha,
               const ESTrainConfig& cfg, Rng& rng) {
  const Matrix g = es_gradient(loss, W, cfg.es, rng);
  const double gn = g.norm();
  Matrix dir = g;
  if (cfg.normalize_step && gn > 0.0) dir /= gn;
  if (gn == 0.0) return {W, current, 0.0, false};
  Matrix next = es_project(W - alpha * dir, cfg.geometry);
  const double next_loss = loss(next);
  // the zero start lies off the sphere with trivially zero loss; its first step is always taken
  const bool from_origin = cfg.geometry == Geometry::kEuclideanBall && W.norm() == 0.0;
  if (cfg.accept_if_decrease && !from_origin && !(next_loss < current)) return {W, current, gn, false};
  return {std::move(next), next_loss, gn, true};
}

TrainTrace run_es(const LossFunction& loss, std::size_t d, std::size_t k, double gamma,
                  const ESTrainConfig& cfg, const Checkpoint& checkpoint) {
  if (cfg.T == 0) throw InvalidArgument("T must be at least 1");
  StepSchedule schedule = cfg.schedule;
  if (!schedule) {
    const double a = theory_constants(d, k, gamma, cfg.geometry).es_alpha(cfg.T);
    schedule = [a](std::size_t) { return a; };
  }
  Rng rng(cfg.es.rng_seed);
  Matrix W = cfg.w1 ? *cfg.w1 : initial_iterate(d, k, cfg.geometry);
  double current = loss(W);
  TrainTrace trace;
  trace.w_best = W;
  trace.best_loss = current;
  // the origin is not a point of the sphere and never counts as the best iterate
  if (cfg.geometry == Geometry::kEuclideanBall && W.norm() == 0.0) {
    trace.best_loss = std::numeric_limits<double>::infinity();
  }
  Matrix sum = Matrix::Zero(W.rows(), W.cols());
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const double alpha = schedule(t);
    auto step = es_step(loss, W, current, alpha, cfg, rng);
    sum += W;
    W = std::move(step.W);
    current = step.loss;
    if (current < trace.best_loss) {
      trace.best_loss = current;
      trace.w_best = W;
    }
    TraceRow row;
    row.step = t;
    row.alpha = alpha;
    row.grad_norm = step.grad_norm;
    if (cfg.eval_every > 0 && (t % cfg.eval_every == 0 || t == cfg.T)) {
      apply_checkpoint(checkpoint, t, trace.w_best, row);
      if (!row.loss) row.loss = trace.best_loss;
    }
    trace.rows.push_back(row);
  }
  trace.w_avg = sum / static_cast<double>(cfg.T);
  trace.w_last = W;
  return trace;
}

std::function<Matrix(LossEvaluator&, const Matrix&)> make_psgd_refit(const MonitoredPSGDConfig& cfg) {
  if (!(cfg.alpha0 > 0.0) || cfg.epochs == 0) throw InvalidArgument("bad monitored PSGD settings");
  auto rng = std::make_shared<Rng>(cfg.seed);
  auto alpha0 = std::make_shared<double>(cfg.alpha0);
  return [cfg, rng, alpha0](LossEvaluator& demos, const Matrix& W0) {
    Matrix W = W0;
    demos.set_policy_cache(W);
    std::vector<std::size_t> order(demos.size());
    std::iota(order.begin(), order.end(), 0);
    double alpha = *alpha0;
    for (std::size_t e = 1; e <= cfg.epochs; ++e) {
      alpha *= std::pow(cfg.inner_decay, static_cast<double>(e));
      std::shuffle(order.begin(), order.end(), *rng);
      for (std::size_t i : order) {
        const auto lg = demos.term_and_subgradient(W, i);
        const double gmax = lg.gradient.cwiseAbs().maxCoeff();
        if (gmax == 0.0) continue;
        Matrix next = W - alpha * lg.gradient / gmax;
        const double norm = next.norm();
        if (norm == 0.0) continue;
        next /= norm;
        // every demo has zero loss at the origin, so the first step away from it is always kept
        if (W.norm() == 0.0 || demos.term(next, i) < lg.loss) W = std::move(next);
      }
    }
    *alpha0 *= cfg.outer_decay;
    return W;
  };
}

std::function<Matrix(LossEvaluator&, const Matrix&)> make_es_refit(const ESTrainConfig& cfg) {
  if (cfg.T == 0) throw InvalidArgument("T must be at least 1");
  if (!cfg.schedule) throw InvalidArgument("monitored ES needs an explicit step schedule");
  cfg.es.validate();
  auto rng = std::make_shared<Rng>(cfg.es.rng_seed);
  return [cfg, rng](LossEvaluator& demos, const Matrix& W0) {
    const LossFunction loss = [&demos](const Matrix& W) { return demos.value(W); };
    Matrix W = W0;
    demos.set_policy_cache(W);
    double current = loss(W);
    Matrix best = W;
    double best_loss = current;
    if (cfg.geometry == Geometry::kEuclideanBall && W.norm() == 0.0) {
      best_loss = std::numeric_limits<double>::infinity();
    }
    for (std::size_t t = 1; t <= cfg.T; ++t) {
      auto step = es_step(loss, W, current, cfg.schedule(t), cfg, *rng);
      if (step.accepted) demos.set_policy_cache(step.W);
      W = std::move(step.W);
      current = step.loss;
      if (current < best_loss) {
        best_loss = current;
        best = W;
      }
    }
    demos.clear_policy_cache();
    return best;
  };
}

}  // namespace coirl
