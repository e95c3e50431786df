#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace coirl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance for simplex membership and kernel row sums. Inputs inside it are renormalized.
inline constexpr double kSimplexTol = 1e-9;

struct Transition {
  std::size_t next;
  double prob;
};

/// Row-compressed transition kernel. Row (s, a) lists the successor states with
/// non-zero probability in increasing index order.
class TransitionKernel {
 public:
  using DenseArray = std::vector<std::vector<std::vector<double>>>;

  TransitionKernel() = default;

  /// `rows[s * n_actions + a]` is the successor list of (s, a). Duplicate successors are
  /// merged, zero entries dropped, and each row renormalized if it sums to 1 within
  /// kSimplexTol; any other row is rejected.
  TransitionKernel(std::size_t n_states, std::size_t n_actions,
                   std::vector<std::vector<Transition>> rows);

  static TransitionKernel from_dense(const DenseArray& p);
  DenseArray to_dense() const;

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t nnz() const noexcept { return entries_.size(); }

  std::span<const Transition> row(std::size_t s, std::size_t a) const noexcept {
    const std::size_t r = s * n_actions_ + a;
    return {entries_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
  }
  double prob(std::size_t s, std::size_t a, std::size_t next) const noexcept;

  /// Max absolute entry-wise difference is at most `tol`.
  bool approx_equal(const TransitionKernel& other, double tol) const;

  /// Entry-wise convex combination sum_i weights[i] * kernels[i].
  static TransitionKernel mix(std::span<const TransitionKernel> kernels, const Vector& weights);

 private:
  std::size_t n_states_{0};
  std::size_t n_actions_{0};
  std::vector<std::size_t> offsets_{0};
  std::vector<Transition> entries_;
};

/// A point of the probability simplex. Validated once on construction.
class Context {
 public:
  explicit Context(Vector c);

  const Vector& vector() const noexcept { return c_; }
  Eigen::Index size() const noexcept { return c_.size(); }
  double operator[](Eigen::Index i) const { return c_[i]; }

 private:
  Vector c_;
};

/// Contextual MDP in the linear setting: P_c = sum_i c_i P_i, R_c(s) = c^T W phi(s).
/// Immutable; copies share storage.
class ContextualMDP {
 public:
  ContextualMDP(std::vector<TransitionKernel> base_kernels, Matrix features, Vector xi,
                double gamma);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t d() const noexcept { return kernels_->size(); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(features_->cols()); }
  double gamma() const noexcept { return gamma_; }

  const std::vector<TransitionKernel>& base_kernels() const noexcept { return *kernels_; }
  const Matrix& features() const noexcept { return *features_; }
  const Vector& xi() const noexcept { return *xi_; }

  std::shared_ptr<const Matrix> shared_features() const noexcept { return features_; }
  std::shared_ptr<const Vector> shared_xi() const noexcept { return xi_; }

  /// True when all base kernels agree within 1e-12.
  bool context_independent() const noexcept { return static_cast<bool>(shared_kernel_); }

  /// P_c; shared (not copied) when the dynamics do not depend on the context.
  std::shared_ptr<const TransitionKernel> kernel_for(const Context& c) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  double gamma_;
  std::shared_ptr<const std::vector<TransitionKernel>> kernels_;
  std::shared_ptr<const Matrix> features_;
  std::shared_ptr<const Vector> xi_;
  std::shared_ptr<const TransitionKernel> shared_kernel_;
};

/// A single MDP: dynamics, features, start distribution, discount and a state reward.
struct InstantiatedMDP {
  std::shared_ptr<const TransitionKernel> kernel;
  std::shared_ptr<const Matrix> features;
  std::shared_ptr<const Vector> xi;
  double gamma{0.0};
  Vector reward;

  std::size_t n_states() const noexcept { return kernel->n_states(); }
  std::size_t n_actions() const noexcept { return kernel->n_actions(); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(features->cols()); }

  InstantiatedMDP with_reward(Vector r) const;
  /// Reward phi(s) . w for a feature-space weight vector.
  InstantiatedMDP with_weights(const Vector& w) const;
};

/// u (.) v: flattened outer product, result[i * v.size() + j] = u[i] * v[j].
Vector outer_flatten(const Vector& u, const Vector& v);

/// As above, checking u against d and v against k of `cmdp`.
Vector outer_flatten(const ContextualMDP& cmdp, const Vector& u, const Vector& v);

/// f_W(c) = W^T c, the reward weights over features.
Vector reward_weights(const Matrix& W, const Context& c);

/// M(c) for the mapping W (d x k); W need not lie in any particular geometry.
InstantiatedMDP instantiate(const ContextualMDP& cmdp, const Context& c, const Matrix& W);

/// Row-major flattening W -> R^{dk}, matching outer_flatten.
Vector flatten(const Matrix& W);
Matrix unflatten(const Vector& w, std::size_t d, std::size_t k);

}  // namespace coirl
