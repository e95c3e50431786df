#include "coirl/loss.hpp"

#include <numeric>

#include "coirl/error.hpp"

namespace coirl {

AgentResponse best_response(const InstantiatedMDP& mdp, const PlannerConfig& cfg,
                            const Vector* warm_start) {
  AgentResponse r;
  r.plan = value_iteration(mdp, cfg, warm_start);
  r.mu = feature_expectations(mdp, r.plan.policy);
  return r;
}

LossEvaluator::LossEvaluator(ContextualMDP cmdp, std::vector<Demonstration> demos,
                             PlannerConfig cfg, kernels::Backend backend)
    : cmdp_(std::move(cmdp)), cfg_(cfg), backend_(backend) {
  for (auto& d : demos) add(std::move(d));
}

void LossEvaluator::add(Demonstration demo) {
  if (static_cast<std::size_t>(demo.context.size()) != cmdp_.d() ||
      static_cast<std::size_t>(demo.mu.size()) != cmdp_.k()) {
    throw InvalidArgument("demonstration dimensions do not match the CMDP");
  }
  InstantiatedMDP m;
  m.kernel = cmdp_.kernel_for(demo.context);
  m.features = cmdp_.shared_features();
  m.xi = cmdp_.shared_xi();
  m.gamma = cmdp_.gamma();
  mdps_.push_back(std::move(m));
  demos_.push_back(std::move(demo));
  warm_.clear();
  cached_.clear();
}

AgentResponse LossEvaluator::respond(const Matrix& W, std::size_t i) const {
  if (!cached_.empty()) {
    const auto& entry = cached_[i];
    const Vector w = reward_weights(W, demos_[i].context);
    const Matrix q = entry.sf.q_for(w);
    const double slack = 1e-12 * (1.0 + q.cwiseAbs().maxCoeff());
    bool optimal = true;
    Vector v(q.rows());
    for (Eigen::Index s = 0; s < q.rows() && optimal; ++s) {
      v[s] = q(s, static_cast<Eigen::Index>(entry.policy[static_cast<std::size_t>(s)]));
      optimal = v[s] >= q.row(s).maxCoeff() - slack;
    }
    if (optimal) {
      AgentResponse r;
      r.plan.values = std::move(v);
      r.plan.policy = entry.policy;
      r.mu = entry.mu;
      return r;
    }
  }
  const auto mdp = mdps_[i].with_weights(reward_weights(W, demos_[i].context));
  return best_response(mdp, cfg_, warm_.empty() ? nullptr : &warm_[i]);
}

double LossEvaluator::term(const Matrix& W, std::size_t i) const {
  const AgentResponse r = respond(W, i);
  return reward_weights(W, demos_[i].context).dot(r.mu - demos_[i].mu);
}

LossAndGradient LossEvaluator::term_and_subgradient(const Matrix& W, std::size_t i) const {
  const AgentResponse r = respond(W, i);
  const Vector diff = r.mu - demos_[i].mu;
  const Vector& c = demos_[i].context.vector();
  return {reward_weights(W, demos_[i].context).dot(diff), c * diff.transpose()};
}

LossReport LossEvaluator::loss(const Matrix& W) const {
  if (demos_.empty()) throw InvalidState("loss needs at least one demonstration");
  const auto terms = kernels::map(backend_, demos_.size(), [&](std::size_t i) { return term(W, i); });
  LossReport report;
  report.per_context.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) report.per_context.emplace_back(demos_[i].context, terms[i]);
  report.value = std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
  return report;
}

double LossEvaluator::value(const Matrix& W) const { return loss(W).value; }

LossAndGradient LossEvaluator::loss_and_subgradient(const Matrix& W) const {
  std::vector<std::size_t> all(demos_.size());
  std::iota(all.begin(), all.end(), 0);
  return loss_and_subgradient(W, all);
}

LossAndGradient LossEvaluator::loss_and_subgradient(const Matrix& W,
                                                    std::span<const std::size_t> subset) const {
  if (subset.empty()) throw InvalidState("subgradient needs at least one demonstration");
  const auto parts = kernels::map(backend_, subset.size(),
                                  [&](std::size_t j) { return term_and_subgradient(W, subset[j]); });
  LossAndGradient out{0.0, Matrix::Zero(W.rows(), W.cols())};
  for (const auto& p : parts) {
    out.loss += p.loss;
    out.gradient += p.gradient;
  }
  const double n = static_cast<double>(parts.size());
  out.loss /= n;
  out.gradient /= n;
  return out;
}

void LossEvaluator::set_warm_start(const Matrix& W) {
  auto values = kernels::map(backend_, demos_.size(), [&](std::size_t i) {
    return value_iteration(mdps_[i].with_weights(reward_weights(W, demos_[i].context)), cfg_).values;
  });
  warm_ = std::move(values);
}

void LossEvaluator::set_policy_cache(const Matrix& W) {
  cached_.clear();
  auto entries = kernels::map(backend_, demos_.size(), [&](std::size_t i) {
    const auto mdp = mdps_[i].with_weights(reward_weights(W, demos_[i].context));
    auto plan = value_iteration(mdp, cfg_);
    auto sf = successor_features(mdp, plan.policy);
    Vector mu = feature_expectations(mdp, plan.policy);
    return CachedResponse{std::move(plan.policy), std::move(sf), std::move(mu)};
  });
  cached_ = std::move(entries);
}

LossReport coirl_loss(const ContextualMDP& cmdp, const Matrix& W,
                      std::span<const Demonstration> demos, const PlannerConfig& cfg,
                      kernels::Backend backend) {
  return LossEvaluator(cmdp, {demos.begin(), demos.end()}, cfg, backend).loss(W);
}

Matrix subgradient(const ContextualMDP& cmdp, const Matrix& W, const Demonstration& demo,
                   const PlannerConfig& cfg) {
  return LossEvaluator(cmdp, {demo}, cfg, kernels::Backend::kSerial).term_and_subgradient(W, 0).gradient;
}

Matrix subgradient(const ContextualMDP& cmdp, const Matrix& W, std::span<const Demonstration> demos,
                   const PlannerConfig& cfg, kernels::Backend backend) {
  return LossEvaluator(cmdp, {demos.begin(), demos.end()}, cfg, backend).loss_and_subgradient(W).gradient;
}

void ESConfig::validate() const {
  if (m == 0) throw InvalidArgument("ES needs at least one perturbation");
  if (!(rho > 0.0) || !(nu > 0.0)) throw InvalidArgument("ES rho and nu must be positive");
}

Matrix es_gradient(const LossFunction& loss, const Matrix& W, const ESConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<double> normal(0.0, cfg.rho);
  std::vector<Matrix> dirs;
  dirs.reserve(cfg.m);
  for (std::size_t j = 0; j < cfg.m; ++j) {
    Matrix u(W.rows(), W.cols());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
    const double norm = u.norm();
    if (norm == 0.0) throw DegenerateStep("zero ES perturbation");
    dirs.push_back(u / norm);
  }
  const double base = cfg.centered ? loss(W) : 0.0;
  const auto values = kernels::map(cfg.backend, cfg.m, [&](std::size_t j) {
    return loss(W + cfg.nu * dirs[j]);
  });
  Matrix g = Matrix::Zero(W.rows(), W.cols());
  for (std::size_t j = 0; j < cfg.m; ++j) g += (values[j] - base) * cfg.nu * dirs[j];
  return g / (static_cast<double>(cfg.m) * cfg.rho);
}

Matrix es_gradient(const LossEvaluator& loss, const Matrix& W, const ESConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return es_gradient([&](const Matrix& x) { return loss.value(x); }, W, cfg, rng);
}

}  // namespace coirl
