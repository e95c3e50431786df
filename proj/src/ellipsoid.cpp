#include "coirl/ellipsoid.hpp"

#include <cmath>
#include <iomanip>

#include "coirl/error.hpp"
#include "coirl/loss.hpp"

namespace coirl {

EllipsoidState EllipsoidState::initial(std::size_t dim) {
  if (dim == 0) throw InvalidArgument("ellipsoid dimension must be positive");
  const auto n = static_cast<Eigen::Index>(dim);
  return {Vector::Zero(n), static_cast<double>(dim) * Matrix::Identity(n, n)};
}

double EllipsoidState::membership(const Vector& x) const {
  const Vector diff = x - center;
  return diff.dot(Q.ldlt().solve(diff));
}

double EllipsoidState::log_det() const {
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("ellipsoid shape matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

bool EllipsoidState::positive_definite() const {
  return Eigen::LLT<Matrix>(Q).info() == Eigen::Success;
}

EllipsoidState mvee_halfspace_update(const EllipsoidState& e, const Vector& a) {
  const std::size_t dim = e.dim();
  if (dim < 2) throw InvalidArgument("the MVEE update needs dimension >= 2");
  if (a.size() != e.center.size()) throw InvalidArgument("cut dimension mismatch");
  if (a.isZero(0.0)) throw DegenerateCut("zero cut direction");
  const Vector qa = e.Q * a;
  const double aqa = a.dot(qa);
  if (!(aqa > 0.0)) throw DegenerateCut("cut has non-positive Q-norm");
  const double D = static_cast<double>(dim);
  const Vector qat = -qa / std::sqrt(aqa);  // Q a_tilde
  EllipsoidState out;
  out.center = e.center - qat / (D + 1.0);
  out.Q = (D * D / (D * D - 1.0)) * (e.Q - (2.0 / (D + 1.0)) * qat * qat.transpose());
  out.Q = 0.5 * (out.Q + out.Q.transpose());
  return out;
}

double volume_ratio_bound(std::size_t dim) {
  return std::exp(-1.0 / (2.0 * (static_cast<double>(dim) + 1.0)));
}

EllipsoidState clamp_center(const EllipsoidState& e, std::size_t max_cuts, std::size_t* cuts_applied) {
  EllipsoidState cur = e;
  std::size_t cuts = 0;
  while (true) {
    Eigen::Index j;
    const double worst = cur.center.cwiseAbs().maxCoeff(&j);
    if (worst <= 1.0) break;
    if (cuts >= max_cuts) throw NonConvergence("center clamping did not reach the box", worst - 1.0);
    Vector a = Vector::Zero(cur.center.size());
    a[j] = cur.center[j] > 0.0 ? -1.0 : 1.0;
    cur = mvee_halfspace_update(cur, a);
    ++cuts;
  }
  if (cuts_applied) *cuts_applied = cuts;
  return cur;
}

void EllipsoidTrace::write_csv(std::ostream& os) const {
  os << std::setprecision(10) << "round,cut_applied,det_Q,volume_ratio,suboptimal_count,holdout_rel_value\n";
  for (const auto& r : rows) {
    os << r.round << ',' << (r.cut_applied ? 1 : 0) << ',' << r.det_q << ',' << r.volume_ratio << ','
       << r.suboptimal_count << ',';
    if (r.holdout_rel_value) os << *r.holdout_rel_value;
    os << '\n';
  }
}

double ellipsoid_cut_bound(std::size_t d, std::size_t k, double gamma, double eps) {
  const double dk = static_cast<double>(d * k);
  return 2.0 * dk * (dk + 1.0) *
         std::log(4.0 * static_cast<double>(k) * std::sqrt(dk) / ((1.0 - gamma) * eps));
}

namespace {

// Applies a cut and updates the bookkeeping shared by both variants.
void apply_cut(EllipsoidState& state, double& log_det, const Vector& a, const Vector& w_star,
               EllipsoidTrace& trace, EllipsoidTraceRow& row) {
  EllipsoidState next = mvee_halfspace_update(state, a);
  const double next_log_det = next.log_det();
  row.cut_applied = true;
  row.volume_ratio = std::exp(0.5 * (next_log_det - log_det));
  trace.max_volume_ratio = std::max(trace.max_volume_ratio, row.volume_ratio);
  state = std::move(next);
  log_det = next_log_det;
  ++trace.cuts;
  trace.max_membership = std::max(trace.max_membership, state.membership(w_star));
  trace.centers.push_back(state.center);
}

}  // namespace

EllipsoidTrace run_ellipsoid(const Expert& expert, const ContextStream& contexts,
                             const EllipsoidConfig& cfg, const HoldoutEvaluator& holdout) {
  if (!(cfg.eps > 0.0)) throw InvalidArgument("eps must be positive");
  const auto& cmdp = expert.cmdp();
  const std::size_t d = cmdp.d(), k = cmdp.k();
  const Vector w_star = flatten(expert.w_star());
  EllipsoidTrace trace;
  EllipsoidState state = EllipsoidState::initial(d * k);
  double log_det = state.log_det();
  trace.max_membership = state.membership(w_star);
  std::size_t quiet = 0;
  for (std::size_t t = 1; t <= cfg.max_rounds; ++t) {
    const Context c = contexts(t);
    const auto sol = expert.solve(c);
    const Matrix W = unflatten(state.center, d, k);
    const auto agent = best_response(sol->mdp.with_weights(reward_weights(W, c)), cfg.planner);
    const double v_hat = reward_weights(expert.w_star(), c).dot(agent.mu);
    EllipsoidTraceRow row;
    row.round = t;
    if (sol->value - v_hat > cfg.eps) {
      ++trace.suboptimal_rounds;
      ++trace.demo_count;
      const Vector a = outer_flatten(c.vector(), sol->mu - agent.mu);
      apply_cut(state, log_det, a, w_star, trace, row);
      quiet = 0;
    } else {
      ++quiet;
    }
    trace.rounds = t;
    row.det_q = std::exp(log_det);
    row.suboptimal_count = trace.suboptimal_rounds;
    const bool last = cfg.patience > 0 && quiet >= cfg.patience;
    if (holdout && ((cfg.eval_every > 0 && t % cfg.eval_every == 0) || last || t == cfg.max_rounds ||
                    (cfg.eval_on_cut && row.cut_applied))) {
      row.holdout_rel_value = holdout(unflatten(state.center, d, k));
    }
    if (cfg.record_every_round || row.cut_applied || row.holdout_rel_value) trace.rows.push_back(row);
    if (last) break;
  }
  trace.final_state = state;
  return trace;
}

std::size_t batch_horizon(std::size_t k, double gamma, double eps) {
  return static_cast<std::size_t>(
      std::ceil(std::log(8.0 * static_cast<double>(k) / ((1.0 - gamma) * eps)) / (1.0 - gamma)));
}

std::size_t batch_size(std::size_t d, std::size_t k, double gamma, double eps, double delta) {
  const double kd = static_cast<double>(k);
  const double dk = static_cast<double>(d * k);
  const double g = 1.0 - gamma;
  const double inner = std::log(16.0 * kd * std::sqrt(dk) / (g * eps));
  const double n = 512.0 * kd * kd / (g * g * eps * eps) * std::log(4.0 * dk * (dk + 1.0) * inner / delta);
  return static_cast<std::size_t>(std::ceil(n));
}

double batch_round_bound(std::size_t n, std::size_t d, std::size_t k, double gamma, double eps) {
  const double dk = static_cast<double>(d * k);
  return static_cast<double>(n) * 2.0 * dk * (dk + 1.0) *
         std::log(16.0 * static_cast<double>(k) * std::sqrt(dk) / ((1.0 - gamma) * eps));
}

BatchConfig BatchConfig::theory(std::size_t d, std::size_t k, double gamma, double eps, double delta) {
  BatchConfig cfg;
  cfg.eps = eps;
  cfg.delta = delta;
  cfg.H = batch_horizon(k, gamma, eps);
  cfg.n = batch_size(d, k, gamma, eps, delta);
  return cfg;
}

EllipsoidTrace run_batch_ellipsoid(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                   const ContextStream& contexts, const BatchConfig& cfg,
                                   const HoldoutEvaluator& holdout) {
  if (!(cfg.eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (cfg.n == 0 || cfg.H == 0) throw InvalidArgument("batch size and horizon must be positive");
  const std::size_t d = cmdp.d(), k = cmdp.k();
  const std::size_t episode = cfg.episode_length > 0 ? cfg.episode_length : cfg.H;
  const Vector w_flat = w_star.flat();
  const Matrix& phi = cmdp.features();
  const double gamma = cmdp.gamma();
  Rng rng(cfg.seed);

  EllipsoidTrace trace;
  EllipsoidState state = clamp_center(EllipsoidState::initial(d * k));
  double log_det = state.log_det();
  trace.max_membership = state.membership(w_flat);
  Vector z_sum = Vector::Zero(static_cast<Eigen::Index>(d * k));
  Vector z_star_sum = z_sum;
  std::size_t i = 0;
  std::size_t quiet = 0;

  for (std::size_t t = 1; t <= cfg.max_rounds; ++t) {
    const Context c = contexts(t);
    const Matrix expert_w = cfg.perturb ? perturb_expert(w_star, cfg.eps, gamma, rng).matrix() : w_star.matrix();
    const InstantiatedMDP expert_mdp = instantiate(cmdp, c, expert_w);
    const PlanResult expert_plan = value_iteration(expert_mdp, cfg.planner);
    const Matrix q_star = q_values(expert_mdp, expert_plan.values);
    const Matrix W = unflatten(state.center, d, k);
    const InstantiatedMDP agent_mdp = expert_mdp.with_weights(reward_weights(W, c));
    const PlanResult agent_plan = value_iteration(agent_mdp, cfg.planner);

    // play one episode and stop at the first action the expert rejects
    std::size_t s = sample_index(cmdp.xi(), rng);
    std::optional<std::size_t> erring;
    for (std::size_t step = 0; step < episode; ++step) {
      const std::size_t a = agent_plan.policy[s];
      const auto si = static_cast<Eigen::Index>(s);
      if (q_star(si, static_cast<Eigen::Index>(a)) + cfg.eps < expert_plan.values[si]) {
        erring = s;
        break;
      }
      s = sample_successor(*expert_mdp.kernel, s, a, rng);
    }

    EllipsoidTraceRow row;
    row.round = t;
    if (erring) {
      ++trace.suboptimal_rounds;
      ++trace.demo_count;
      quiet = 0;
      const Trajectory roll = rollout(expert_mdp, expert_plan.policy, *erring, cfg.H, rng);
      const Vector x_star = trajectory_feature_sum(phi, roll, gamma);
      const Vector x = state_feature_expectations(agent_mdp, agent_plan.policy)
                           .row(static_cast<Eigen::Index>(*erring))
                           .transpose();
      z_sum += outer_flatten(c.vector(), x);
      z_star_sum += outer_flatten(c.vector(), x_star);
      if (++i == cfg.n) {
        const Vector a = (z_star_sum - z_sum) / static_cast<double>(cfg.n);
        apply_cut(state, log_det, a, w_flat, trace, row);
        std::size_t extra = 0;
        state = clamp_center(state, 10000, &extra);
        if (extra > 0) {
          trace.clamp_cuts += extra;
          log_det = state.log_det();
          trace.max_membership = std::max(trace.max_membership, state.membership(w_flat));
        }
        i = 0;
        z_sum.setZero();
        z_star_sum.setZero();
      }
    } else {
      ++quiet;
    }
    trace.rounds = t;
    row.det_q = std::exp(log_det);
    row.suboptimal_count = trace.suboptimal_rounds;
    const bool last = cfg.patience > 0 && quiet >= cfg.patience;
    if (holdout && (row.cut_applied || last || t == cfg.max_rounds)) {
      row.holdout_rel_value = holdout(unflatten(state.center, d, k));
    }
    if (row.cut_applied || row.holdout_rel_value) trace.rows.push_back(row);
    if (last) break;
  }
  trace.final_state = state;
  return trace;
}

std::optional<std::size_t> MonitoredTrace::demos_to_reach(double target) const {
  for (const auto& r : rows) {
    if (r.holdout_rel_value >= target) return r.demos;
  }
  return std::nullopt;
}

MonitoredTrace run_monitored(const Expert& expert, const ContextStream& contexts, Matrix w0,
                             const MonitoredRefit& refit, const MonitoredConfig& cfg,
                             const HoldoutEvaluator& holdout) {
  if (!(cfg.eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!refit) throw InvalidArgument("monitored protocol needs a refit rule");
  const auto& cmdp = expert.cmdp();
  if (static_cast<std::size_t>(w0.rows()) != cmdp.d() || static_cast<std::size_t>(w0.cols()) != cmdp.k()) {
    throw InvalidArgument("initial estimate has the wrong shape");
  }
  LossEvaluator demos(cmdp, {}, cfg.planner, kernels::Backend::kSerial);
  MonitoredTrace trace;
  trace.W = std::move(w0);
  if (holdout) trace.rows.push_back({0, 0, holdout(trace.W)});
  std::size_t quiet = 0;
  for (std::size_t t = 1; t <= cfg.max_rounds; ++t) {
    const Context c = contexts(t);
    const auto sol = expert.solve(c);
    const auto agent = best_response(sol->mdp.with_weights(reward_weights(trace.W, c)), cfg.planner);
    const double v_hat = reward_weights(expert.w_star(), c).dot(agent.mu);
    trace.rounds = t;
    if (sol->value - v_hat > cfg.eps) {
      demos.add(expert.exact_demonstration(c));
      ++trace.demo_count;
      trace.W = refit(demos, trace.W);
      if (holdout) trace.rows.push_back({t, trace.demo_count, holdout(trace.W)});
      quiet = 0;
    } else if (cfg.patience > 0 && ++quiet >= cfg.patience) {
      break;
    }
  }
  return trace;
}

std::optional<std::size_t> demos_to_reach(const EllipsoidTrace& trace, double initial, double target) {
  if (initial >= target) return 0;
  for (const auto& r : trace.rows) {
    if (r.cut_applied && r.holdout_rel_value && *r.holdout_rel_value >= target) return r.suboptimal_count;
  }
  return std::nullopt;
}

}  // namespace coirl
