#include "coirl/expert.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "coirl/error.hpp"

namespace coirl {

std::string_view to_string(DemoScheme s) {
  switch (s) {
    case DemoScheme::kExact: return "exact";
    case DemoScheme::kGeometric: return "geometric";
    case DemoScheme::kFixedHorizon: return "fixed-horizon";
  }
  return "unknown";
}

DemoScheme parse_demo_scheme(std::string_view name) {
  if (name == "exact") return DemoScheme::kExact;
  if (name == "geometric") return DemoScheme::kGeometric;
  if (name == "fixed-horizon" || name == "trajectory") return DemoScheme::kFixedHorizon;
  throw InvalidArgument("unknown demonstration scheme: " + std::string(name));
}

std::size_t fixed_horizon_length(double gamma, double eps_h) {
  if (!(eps_h > 0.0 && eps_h < 1.0)) throw InvalidArgument("eps_h must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(std::log(1.0 / eps_h) / (1.0 - gamma)));
}

std::size_t SamplingScheme::resolved_horizon(double gamma) const {
  return horizon ? *horizon : fixed_horizon_length(gamma, eps_h);
}

std::size_t sample_index(const Vector& dist, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(i);
    u -= dist[i];
    if (u < 0.0) return static_cast<std::size_t>(i);
  }
  return last_positive;
}

std::size_t sample_successor(const TransitionKernel& p, std::size_t s, std::size_t a, Rng& rng) {
  const auto row = p.row(s, a);
  if (row.size() == 1) return row[0].next;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  for (const auto& t : row) {
    u -= t.prob;
    if (u < 0.0) return t.next;
  }
  return row.back().next;
}

Trajectory rollout(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                   std::size_t start, std::size_t horizon, Rng& rng) {
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  std::size_t s = start;
  traj.states.push_back(s);
  for (std::size_t h = 0; h < horizon; ++h) {
    const std::size_t a = policy[s];
    traj.actions.push_back(a);
    s = sample_successor(*mdp.kernel, s, a, rng);
    traj.states.push_back(s);
  }
  return traj;
}

Trajectory geometric_rollout(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                             std::size_t start, Rng& rng) {
  std::bernoulli_distribution cont(mdp.gamma);
  Trajectory traj;
  std::size_t s = start;
  traj.states.push_back(s);
  while (cont(rng)) {
    const std::size_t a = policy[s];
    traj.actions.push_back(a);
    s = sample_successor(*mdp.kernel, s, a, rng);
    traj.states.push_back(s);
  }
  return traj;
}

Vector trajectory_feature_sum(const Matrix& features, const Trajectory& traj, double weight) {
  Vector out = Vector::Zero(features.cols());
  double w = 1.0;
  for (std::size_t s : traj.states) {
    out += w * features.row(static_cast<Eigen::Index>(s)).transpose();
    w *= weight;
  }
  return out;
}

Vector estimate_feature_expectations(const Matrix& features, double gamma, DemoScheme scheme,
                                     const Trajectory& traj) {
  switch (scheme) {
    case DemoScheme::kGeometric: return trajectory_feature_sum(features, traj, 1.0);
    case DemoScheme::kFixedHorizon: return trajectory_feature_sum(features, traj, gamma);
    case DemoScheme::kExact: break;
  }
  throw InvalidArgument("exact demonstrations carry mu directly, not a trajectory");
}

namespace {

std::uint64_t hash_context(const Vector& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    std::uint64_t bits;
    const double x = c[i];
    std::memcpy(&bits, &x, sizeof bits);
    h = mix_seed(h ^ bits);
  }
  return h;
}

constexpr std::size_t kCacheLimit = 4096;

}  // namespace

Expert::Expert(ContextualMDP cmdp, Matrix w_star, PlannerConfig cfg)
    : cmdp_(std::move(cmdp)), w_star_(std::move(w_star)), cfg_(cfg) {
  if (static_cast<std::size_t>(w_star_.rows()) != cmdp_.d() ||
      static_cast<std::size_t>(w_star_.cols()) != cmdp_.k()) {
    throw InvalidArgument("expert mapping must be d x k");
  }
}

std::shared_ptr<const Expert::Solution> Expert::solve(const Context& c) const {
  const std::uint64_t h = hash_context(c.vector());
  {
    std::lock_guard lock(mutex_);
    auto [lo, hi] = cache_.equal_range(h);
    for (auto it = lo; it != hi; ++it)
      if (it->second->context == c.vector()) return it->second;
  }
  auto sol = std::make_shared<Solution>();
  sol->context = c.vector();
  sol->mdp = instantiate(cmdp_, c, w_star_);
  sol->plan = value_iteration(sol->mdp, cfg_);
  sol->mu = feature_expectations(sol->mdp, sol->plan.policy);
  sol->value = reward_weights(w_star_, c).dot(sol->mu);
  std::lock_guard lock(mutex_);
  if (cache_.size() >= kCacheLimit) cache_.clear();
  cache_.emplace(h, sol);
  return sol;
}

Demonstration Expert::exact_demonstration(const Context& c) const {
  return Demonstration{c, DemoScheme::kExact, {}, solve(c)->mu};
}

Demonstration Expert::sample_trajectory(const Context& c, const SamplingScheme& scheme,
                                        Rng& rng) const {
  const auto sol = solve(c);
  const std::size_t start = sample_index(cmdp_.xi(), rng);
  Trajectory traj;
  switch (scheme.kind) {
    case DemoScheme::kGeometric:
      traj = geometric_rollout(sol->mdp, sol->plan.policy, start, rng);
      break;
    case DemoScheme::kFixedHorizon:
      traj = rollout(sol->mdp, sol->plan.policy, start, scheme.resolved_horizon(cmdp_.gamma()), rng);
      break;
    case DemoScheme::kExact:
      throw InvalidArgument("sample_trajectory needs a geometric or fixed-horizon scheme");
  }
  Vector mu = estimate_feature_expectations(cmdp_.features(), cmdp_.gamma(), scheme.kind, traj);
  return Demonstration{c, scheme.kind, std::move(traj), std::move(mu)};
}

Demonstration Expert::demonstrate(const Context& c, const SamplingScheme& scheme, Rng& rng) const {
  if (scheme.kind == DemoScheme::kExact) return exact_demonstration(c);
  return sample_trajectory(c, scheme, rng);
}

Demonstration exact_demonstration(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                  const Context& c, const PlannerConfig& cfg) {
  return Expert(cmdp, w_star.matrix(), cfg).exact_demonstration(c);
}

Demonstration sample_trajectory(const ContextualMDP& cmdp, const RewardMapping& w_star,
                                const Context& c, const SamplingScheme& scheme,
                                const PlannerConfig& cfg) {
  Rng rng(scheme.rng_seed);
  return Expert(cmdp, w_star.matrix(), cfg).sample_trajectory(c, scheme, rng);
}

double near_optimal_radius(double eps, double gamma, std::size_t k) {
  return (1.0 - gamma) * eps / (8.0 * static_cast<double>(k));
}

RewardMapping perturb_expert(const RewardMapping& w_star, double eps, double gamma, Rng& rng) {
  if (!(eps > 0.0)) throw InvalidArgument("perturb_expert: eps must be positive");
  const double r = near_optimal_radius(eps, gamma, w_star.k());
  Matrix out = w_star.matrix();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double lo = std::max(-1.0, out(i) - r);
    const double hi = std::min(1.0, out(i) + r);
    out(i) = lo < hi ? std::uniform_real_distribution<double>(lo, hi)(rng) : lo;
  }
  return RewardMapping(std::move(out), Geometry::kLinfBox);
}

}  // namespace coirl
