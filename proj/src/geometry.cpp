#include "coirl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "coirl/error.hpp"

namespace coirl {

std::string_view to_string(Geometry g) {
  switch (g) {
    case Geometry::kEuclideanBall: return "ball";
    case Geometry::kSimplex: return "simplex";
    case Geometry::kLinfBox: return "box";
  }
  return "unknown";
}

Geometry parse_geometry(std::string_view name) {
  if (name == "ball" || name == "euclidean-ball") return Geometry::kEuclideanBall;
  if (name == "simplex") return Geometry::kSimplex;
  if (name == "box" || name == "linf-box") return Geometry::kLinfBox;
  throw InvalidArgument("unknown geometry: " + std::string(name));
}

bool in_geometry(const Matrix& W, Geometry g, double tol) {
  if (!W.allFinite()) return false;
  switch (g) {
    case Geometry::kEuclideanBall: return W.norm() <= 1.0 + tol;
    case Geometry::kSimplex: return W.minCoeff() >= -tol && std::abs(W.sum() - 1.0) <= tol;
    case Geometry::kLinfBox: return W.cwiseAbs().maxCoeff() <= 1.0 + tol;
  }
  return false;
}

Matrix project(const Matrix& W, Geometry g) {
  switch (g) {
    case Geometry::kEuclideanBall: {
      const double n = W.norm();
      return n > 1.0 ? Matrix(W / n) : W;
    }
    case Geometry::kLinfBox: return W.cwiseMax(-1.0).cwiseMin(1.0);
    case Geometry::kSimplex: {
      std::vector<double> v(W.data(), W.data() + W.size());
      std::sort(v.begin(), v.end(), std::greater<>());
      double cumsum = 0.0;
      double theta = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        cumsum += v[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (v[i] - t > 0.0) theta = t;
      }
      return (W.array() - theta).cwiseMax(0.0).matrix();
    }
  }
  return W;
}

Matrix sample_in_geometry(Rng& rng, std::size_t d, std::size_t k, Geometry g) {
  const auto rows = static_cast<Eigen::Index>(d);
  const auto cols = static_cast<Eigen::Index>(k);
  Matrix W(rows, cols);
  switch (g) {
    case Geometry::kEuclideanBall: {
      std::normal_distribution<double> normal;
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = normal(rng);
      std::uniform_real_distribution<double> unif;
      const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(d * k));
      W *= radius / W.norm();
      break;
    }
    case Geometry::kSimplex: {
      std::exponential_distribution<double> expo(1.0);
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = expo(rng);
      W /= W.sum();
      break;
    }
    case Geometry::kLinfBox: {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = unif(rng);
      break;
    }
  }
  return W;
}

RewardMapping::RewardMapping(Matrix W, Geometry g) : W_(std::move(W)), geometry_(g) {
  if (W_.size() == 0) throw InvalidArgument("reward mapping must be non-empty");
  if (!in_geometry(W_, g)) {
    throw InvalidArgument("reward mapping does not lie in the " + std::string(to_string(g)) +
                          " geometry");
  }
}

}  // namespace coirl
