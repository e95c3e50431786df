#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "coirl/cmdp.hpp"
#include "coirl/rng.hpp"

namespace coirl {

/// Constraint set for the reward mapping W.
enum class Geometry {
  kEuclideanBall,  ///< ||W||_2 <= 1 (Frobenius)
  kSimplex,        ///< entries >= 0, sum = 1
  kLinfBox,        ///< ||W||_inf <= 1
};

std::string_view to_string(Geometry g);
Geometry parse_geometry(std::string_view name);

bool in_geometry(const Matrix& W, Geometry g, double tol = kSimplexTol);

/// Euclidean projection onto the set (scaling for the ball, sort-based for the simplex,
/// clipping for the box).
Matrix project(const Matrix& W, Geometry g);

/// Uniform sample from the set (Dirichlet(1) for the simplex).
Matrix sample_in_geometry(Rng& rng, std::size_t d, std::size_t k, Geometry g);

/// A d x k mapping known to lie in its declared geometry.
class RewardMapping {
 public:
  RewardMapping(Matrix W, Geometry g);

  const Matrix& matrix() const noexcept { return W_; }
  Geometry geometry() const noexcept { return geometry_; }
  std::size_t d() const noexcept { return static_cast<std::size_t>(W_.rows()); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(W_.cols()); }
  Vector flat() const { return flatten(W_); }

 private:
  Matrix W_;
  Geometry geometry_;
};

}  // namespace coirl
