#include "coirl/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "coirl/error.hpp"
#include "coirl/rng.hpp"

namespace coirl {

std::string_view to_string(BCFeatureMap m) {
  return m == BCFeatureMap::kConcat ? "concat" : "state-context";
}

BCFeatureMap parse_bc_feature_map(std::string_view name) {
  if (name == "concat") return BCFeatureMap::kConcat;
  if (name == "state-context") return BCFeatureMap::kStateContext;
  throw InvalidArgument("unknown BC feature map: " + std::string(name));
}

void MixedPolicy::validate() const {
  if (components.empty()) throw InvalidArgument("mixed policy has no components");
  double total = 0.0;
  for (const auto& [pi, w] : components) {
    if (w < 0.0) throw InvalidArgument("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
}

Vector MixedPolicy::feature_expectations(const InstantiatedMDP& mdp) const {
  validate();
  Vector mu = Vector::Zero(static_cast<Eigen::Index>(mdp.k()));
  for (const auto& [pi, w] : components) {
    if (w > 0.0) mu += w * coirl::feature_expectations(mdp, pi);
  }
  return mu;
}

LargeMDP build_large_mdp(const ContextualMDP& cmdp, std::span<const Context> contexts) {
  if (contexts.empty()) throw InvalidArgument("large MDP needs at least one context");
  const std::size_t ns = cmdp.n_states(), na = cmdp.n_actions(), nc = contexts.size();
  const std::size_t d = cmdp.d(), k = cmdp.k();
  std::vector<std::vector<Transition>> rows;
  rows.reserve(ns * na * nc);
  auto features = std::make_shared<Matrix>(static_cast<Eigen::Index>(ns * nc), static_cast<Eigen::Index>(d * k));
  auto xi = std::make_shared<Vector>(static_cast<Eigen::Index>(ns * nc));
  for (std::size_t j = 0; j < nc; ++j) {
    const auto p = cmdp.kernel_for(contexts[j]);
    const std::size_t offset = j * ns;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        std::vector<Transition> row;
        for (const auto& t : p->row(s, a)) row.push_back({offset + t.next, t.prob});
        rows.push_back(std::move(row));
      }
      const auto i = static_cast<Eigen::Index>(offset + s);
      features->row(i) =
          outer_flatten(contexts[j].vector(), cmdp.features().row(static_cast<Eigen::Index>(s)).transpose())
              .transpose();
      (*xi)[i] = cmdp.xi()[static_cast<Eigen::Index>(s)] / static_cast<double>(nc);
    }
  }
  LargeMDP out;
  out.mdp.kernel = std::make_shared<const TransitionKernel>(ns * nc, na, std::move(rows));
  out.mdp.features = std::move(features);
  out.mdp.xi = std::move(xi);
  out.mdp.gamma = cmdp.gamma();
  out.mdp.reward = Vector::Zero(static_cast<Eigen::Index>(ns * nc));
  out.contexts.assign(contexts.begin(), contexts.end());
  out.base_states = ns;
  return out;
}

Vector stacked_feature_expectations(const LargeMDP& large, std::span<const DeterministicPolicy> policies) {
  if (policies.size() != large.contexts.size()) throw InvalidArgument("one policy per context expected");
  DeterministicPolicy joint;
  for (const auto& pi : policies) {
    if (pi.size() != large.base_states) throw InvalidArgument("policy size != base states");
    joint.actions.insert(joint.actions.end(), pi.actions.begin(), pi.actions.end());
  }
  return feature_expectations(large.mdp, joint);
}

namespace {

DeterministicPolicy best_response_policy(const InstantiatedMDP& mdp, const Vector& w, const PlannerConfig& cfg) {
  return value_iteration(mdp.with_weights(w), cfg).policy;
}

}  // namespace

ALResult al_projection(const InstantiatedMDP& mdp, const Vector& mu_e, std::size_t T, double tol,
                       const PlannerConfig& cfg) {
  if (static_cast<std::size_t>(mu_e.size()) != mdp.k()) throw InvalidArgument("mu_E size != k");
  ALResult out;
  DeterministicPolicy pi0;
  pi0.actions.assign(mdp.n_states(), 0);
  out.mu_bar = feature_expectations(mdp, pi0);
  out.policy.components.emplace_back(std::move(pi0), 1.0);
  out.distance.push_back((out.mu_bar - mu_e).norm());
  for (std::size_t t = 1; t <= T && out.distance.back() > tol; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const Vector w = mu_e - out.mu_bar;
    out.w_trace.push_back(w);
    DeterministicPolicy pi = best_response_policy(mdp, w, cfg);
    const Vector mu = feature_expectations(mdp, pi);
    const Vector step = mu - out.mu_bar;
    const double denom = step.squaredNorm();
    double lambda = denom > 0.0 ? step.dot(mu_e - out.mu_bar) / denom : 0.0;
    lambda = std::clamp(lambda, 0.0, 1.0);
    for (auto& [p, weight] : out.policy.components) weight *= 1.0 - lambda;
    out.policy.components.emplace_back(std::move(pi), lambda);
    out.mu_bar += lambda * step;
    out.distance.push_back((out.mu_bar - mu_e).norm());
    out.iterations = t;
    out.iteration_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    if (lambda == 0.0) break;  // no policy improves on the current mixture
  }
  return out;
}

double mwal_bound(std::size_t k_prime, double gamma, std::size_t T) {
  return std::sqrt(std::log(static_cast<double>(k_prime))) * (2.0 / (1.0 - gamma)) *
         std::sqrt(2.0 / static_cast<double>(T));
}

MWALResult mwal(const InstantiatedMDP& mdp, const Vector& mu_e, std::size_t T, const PlannerConfig& cfg) {
  if (T == 0) throw InvalidArgument("T must be at least 1");
  const auto kp = static_cast<Eigen::Index>(mdp.k());
  if (mu_e.size() != kp) throw InvalidArgument("mu_E size != k");
  MWALResult out;
  out.step = (1.0 - mdp.gamma) * std::sqrt(std::log(std::max<double>(2.0, static_cast<double>(kp))) /
                                            (2.0 * static_cast<double>(T)));
  Vector logw = Vector::Zero(kp);
  out.mu_mix = Vector::Zero(kp);
  for (std::size_t t = 1; t <= T; ++t) {
    Vector w = (logw.array() - logw.maxCoeff()).exp().matrix();
    w /= w.sum();
    out.w_trace.push_back(w);
    DeterministicPolicy pi = best_response_policy(mdp, w, cfg);
    const Vector mu = feature_expectations(mdp, pi);
    logw -= out.step * (mu - mu_e);
    out.mu_mix += mu / static_cast<double>(T);
    out.policy.components.emplace_back(std::move(pi), 1.0 / static_cast<double>(T));
  }
  return out;
}

std::size_t bc_input_size(BCFeatureMap map, std::size_t d, std::size_t k, std::size_t n_states) {
  return map == BCFeatureMap::kConcat ? d + k + 1 : (d + 1) * n_states;
}

Vector bc_features(BCFeatureMap map, const Matrix& phi, const Context& c, std::size_t s) {
  const auto d = c.size();
  if (map == BCFeatureMap::kConcat) {
    Vector x(d + phi.cols() + 1);
    x << c.vector(), phi.row(static_cast<Eigen::Index>(s)).transpose(), 1.0;
    return x;
  }
  const auto ns = phi.rows();
  Vector x = Vector::Zero((d + 1) * ns);
  const auto si = static_cast<Eigen::Index>(s);
  x.segment(si * d, d) = c.vector();
  x[d * ns + si] = 1.0;
  return x;
}

BCModel bc_zero_model(BCFeatureMap map, const Matrix& phi, std::size_t d, std::size_t n_actions) {
  BCModel m;
  m.feature_map = map;
  m.weights = Matrix::Zero(static_cast<Eigen::Index>(n_actions),
                           static_cast<Eigen::Index>(bc_input_size(map, d, static_cast<std::size_t>(phi.cols()),
                                                                   static_cast<std::size_t>(phi.rows()))));
  return m;
}

namespace {

Vector softmax(const Vector& z) {
  Vector e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

Vector bc_predict(const BCModel& model, const Matrix& phi, const Context& c, std::size_t s) {
  return softmax(model.weights * bc_features(model.feature_map, phi, c, s));
}

std::size_t bc_greedy(const BCModel& model, const Matrix& phi, const Context& c, std::size_t s) {
  const Vector scores = model.weights * bc_features(model.feature_map, phi, c, s);
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < scores.size(); ++a)
    if (scores[a] > scores[best]) best = a;
  return static_cast<std::size_t>(best);
}

DeterministicPolicy bc_policy(const BCModel& model, const Matrix& phi, const Context& c) {
  DeterministicPolicy pi;
  pi.actions.resize(static_cast<std::size_t>(phi.rows()));
  for (std::size_t s = 0; s < pi.actions.size(); ++s) pi.actions[s] = bc_greedy(model, phi, c, s);
  return pi;
}

double bc_loss(const BCModel& model, std::span<const BCSample> data, const Matrix& phi, double l2,
               Matrix* gradient) {
  if (data.empty()) throw InvalidArgument("empty BC dataset");
  double loss = 0.0;
  if (gradient) *gradient = Matrix::Zero(model.weights.rows(), model.weights.cols());
  for (const auto& ex : data) {
    const Vector x = bc_features(model.feature_map, phi, ex.context, ex.state);
    const Vector z = model.weights * x;
    const double top = z.maxCoeff();
    const double lse = top + std::log((z.array() - top).exp().sum());
    loss += lse - z[static_cast<Eigen::Index>(ex.action)];
    if (gradient) {
      Vector p = (z.array() - lse).exp().matrix();
      p[static_cast<Eigen::Index>(ex.action)] -= 1.0;
      *gradient += p * x.transpose();
    }
  }
  const double n = static_cast<double>(data.size());
  loss = loss / n + 0.5 * l2 * model.weights.squaredNorm();
  if (gradient) *gradient = *gradient / n + l2 * model.weights;
  return loss;
}

BCModel bc_train(std::span<const BCSample> data, const Matrix& phi, std::size_t n_actions, const BCConfig& cfg) {
  if (data.empty()) throw InvalidArgument("empty BC dataset");
  if (cfg.batch_size == 0) throw InvalidArgument("batch size must be positive");
  BCModel model = bc_zero_model(cfg.feature_map, phi, static_cast<std::size_t>(data.front().context.size()), n_actions);
  model.seed = cfg.seed;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<BCSample> batch;
  double lr = cfg.learning_rate;
  Matrix grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(data[order[i]]);
      bc_loss(model, batch, phi, cfg.l2, &grad);
      model.weights -= lr * grad;
    }
    lr *= cfg.decay;
  }
  return model;
}

double bc_accuracy(const BCModel& model, std::span<const BCSample> data, const Matrix& phi) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : data) hits += bc_greedy(model, phi, ex.context, ex.state) == ex.action;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace coirl
