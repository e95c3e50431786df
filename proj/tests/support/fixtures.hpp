#pragma once

#include <cstddef>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/rng.hpp"

namespace coirl::testing {

// Random dense kernel with every entry drawn uniformly then normalized.
inline TransitionKernel random_kernel(std::size_t n, std::size_t na, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TransitionKernel::DenseArray p(n, std::vector<std::vector<double>>(na, std::vector<double>(n)));
  for (auto& s : p)
    for (auto& row : s) {
      double z = 0.0;
      for (double& x : row) z += (x = u(rng));
      for (double& x : row) x /= z;
    }
  return TransitionKernel::from_dense(p);
}

inline ContextualMDP random_cmdp(std::size_t n, std::size_t na, std::size_t d, std::size_t k,
                                 double gamma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TransitionKernel> ks;
  for (std::size_t i = 0; i < d; ++i) ks.push_back(random_kernel(n, na, rng));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = u(rng);
  Vector xi = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  return ContextualMDP(std::move(ks), std::move(phi), std::move(xi), gamma);
}

inline Vector random_simplex(std::size_t d, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector c(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = e(rng);
  return c / c.sum();
}

// Deterministic kernel from a successor table next[s][a].
inline TransitionKernel deterministic_kernel(const std::vector<std::vector<std::size_t>>& next) {
  const std::size_t na = next.front().size();
  std::vector<std::vector<Transition>> rows;
  for (const auto& s : next)
    for (std::size_t a = 0; a < na; ++a) rows.push_back({{s[a], 1.0}});
  return TransitionKernel(next.size(), na, std::move(rows));
}

}  // namespace coirl::testing
