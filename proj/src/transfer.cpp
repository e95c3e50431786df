#include "coirl/transfer.hpp"

#include <algorithm>
#include <limits>

#include "coirl/error.hpp"

namespace coirl {

namespace {

double linf(const Context& a, const Context& b) {
  return (a.vector() - b.vector()).cwiseAbs().maxCoeff();
}

}  // namespace

PolicyLibrary::PolicyLibrary(ContextualMDP cmdp, Matrix W) : cmdp_(std::move(cmdp)), W_(std::move(W)) {
  if (static_cast<std::size_t>(W_.rows()) != cmdp_.d() || static_cast<std::size_t>(W_.cols()) != cmdp_.k()) {
    throw InvalidArgument("library mapping must be d x k");
  }
}

LibraryEntry make_library_entry(const ContextualMDP& cmdp, const Matrix& W, const Context& c,
                                const PlannerConfig& cfg) {
  const auto mdp = instantiate(cmdp, c, W);
  auto plan = value_iteration(mdp, cfg);
  auto psi = successor_features(mdp, plan.policy);
  Vector values = policy_values(mdp, plan.policy);
  return {c, std::move(plan.policy), std::move(psi), std::move(values)};
}

void PolicyLibrary::add(const Context& c, const PlannerConfig& cfg) {
  entries_.push_back(make_library_entry(cmdp_, W_, c, cfg));
}

void PolicyLibrary::add(LibraryEntry entry) {
  if (entry.psi.n_states() != cmdp_.n_states() || entry.policy.size() != cmdp_.n_states()) {
    throw InvalidArgument("library entry does not match the CMDP");
  }
  entries_.push_back(std::move(entry));
}

PolicyLibrary PolicyLibrary::build(const ContextualMDP& cmdp, const Matrix& W,
                                   std::span<const Context> contexts, const PlannerConfig& cfg,
                                   kernels::Backend backend) {
  PolicyLibrary lib(cmdp, W);
  auto entries = kernels::map(backend, contexts.size(),
                              [&](std::size_t i) { return make_library_entry(cmdp, W, contexts[i], cfg); });
  for (auto& e : entries) lib.entries_.push_back(std::move(e));
  return lib;
}

DeterministicPolicy gpi_policy(const PolicyLibrary& lib, const Context& c, const Matrix& W) {
  if (!lib.cmdp().context_independent()) {
    throw UnsupportedDynamics("GPI needs context-independent dynamics; use nearest_transfer");
  }
  if (lib.empty()) throw InvalidState("GPI over an empty library");
  const Vector w = reward_weights(W, c);
  const std::size_t ns = lib.cmdp().n_states(), na = lib.cmdp().n_actions();
  Matrix best = Matrix::Constant(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na),
                                 -std::numeric_limits<double>::infinity());
  for (const auto& e : lib.entries()) best = best.cwiseMax(e.psi.q_for(w));
  return greedy_policy(best);
}

double transfer_bound(const TransferBoundInputs& in, double dist) {
  if (dist < 0.0) throw InvalidArgument("distance must be non-negative");
  if (in.phi_max < 0.0 || in.v_max < 0.0) throw InvalidArgument("phi_max and v_max must be non-negative");
  if (dist == 0.0) return 0.0;
  const double g = in.gamma;
  if (!in.context_dependent) return 2.0 * in.phi_max / (1.0 - g) * dist;
  if (g == 0.0) throw InvalidArgument("the contextual-dynamics bound needs gamma > 0");
  return 2.0 * (in.phi_max + g * static_cast<double>(in.d) * in.v_max) / (g * (1.0 - g)) * dist;
}

double simplex_transfer_bound(std::size_t d, double gamma, double dist) {
  return 2.0 * (1.0 - gamma + gamma * static_cast<double>(d)) / (gamma * (1.0 - gamma) * (1.0 - gamma)) * dist;
}

TransferBoundInputs bound_inputs(const PolicyLibrary& lib) {
  TransferBoundInputs in;
  const Matrix& phi = lib.cmdp().features();
  in.phi_max = (phi * lib.mapping().transpose()).rowwise().lpNorm<1>().maxCoeff();
  for (const auto& e : lib.entries()) in.v_max = std::max(in.v_max, e.values.cwiseAbs().maxCoeff());
  in.d = lib.cmdp().d();
  in.gamma = lib.cmdp().gamma();
  in.context_dependent = !lib.cmdp().context_independent();
  return in;
}

double library_distance(const PolicyLibrary& lib, const Context& c) {
  if (lib.empty()) throw InvalidState("empty policy library");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : lib.entries()) best = std::min(best, linf(c, e.context));
  return best;
}

NearestTransfer nearest_transfer(const PolicyLibrary& lib, const Context& c) {
  if (lib.empty()) throw InvalidState("empty policy library");
  NearestTransfer out;
  out.distance = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < lib.size(); ++j) {
    const double dist = linf(c, lib.entries()[j].context);
    if (dist < out.distance) {
      out.distance = dist;
      out.index = j;
    }
  }
  out.policy = lib.entries()[out.index].policy;
  out.bound = transfer_bound(bound_inputs(lib), out.distance);
  return out;
}

std::vector<std::size_t> farthest_point_subset(std::span<const Context> contexts, std::size_t m) {
  std::vector<std::size_t> chosen;
  if (contexts.empty() || m == 0) return chosen;
  m = std::min(m, contexts.size());
  std::vector<double> dist(contexts.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  while (chosen.size() < m) {
    const std::size_t added = next;
    chosen.push_back(added);
    double far = -1.0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      dist[i] = std::min(dist[i], linf(contexts[i], contexts[added]));
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    if (far <= 0.0) break;
  }
  return chosen;
}

double covering_radius(std::span<const Context> chosen, std::span<const Context> queries) {
  if (chosen.empty()) throw InvalidState("covering radius of an empty set");
  double radius = 0.0;
  for (const auto& q : queries) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : chosen) best = std::min(best, linf(q, c));
    radius = std::max(radius, best);
  }
  return radius;
}

}  // namespace coirl
