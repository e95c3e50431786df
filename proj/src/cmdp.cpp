#include "coirl/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coirl/error.hpp"

namespace coirl {

namespace {

std::string row_label(std::size_t s, std::size_t a) {
  std::ostringstream os;
  os << "(" << s << ", " << a << ")";
  return os.str();
}

}  // namespace

TransitionKernel::TransitionKernel(std::size_t n_states, std::size_t n_actions,
                                   std::vector<std::vector<Transition>> rows)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states == 0 || n_actions == 0) {
    throw InvalidArgument("transition kernel needs at least one state and one action");
  }
  if (rows.size() != n_states * n_actions) {
    throw InvalidArgument("transition kernel: expected n_states * n_actions rows");
  }
  offsets_.reserve(rows.size() + 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    std::sort(row.begin(), row.end(),
              [](const Transition& x, const Transition& y) { return x.next < y.next; });
    const std::size_t begin = entries_.size();
    double total = 0.0;
    for (const auto& t : row) {
      if (t.next >= n_states) {
        throw InvalidArgument("transition kernel: successor index out of range at row " +
                              row_label(r / n_actions, r % n_actions));
      }
      if (!(t.prob >= 0.0) || !std::isfinite(t.prob)) {
        throw InvalidArgument("transition kernel: negative or non-finite entry at row " +
                              row_label(r / n_actions, r % n_actions));
      }
      total += t.prob;
      if (t.prob == 0.0) continue;
      if (entries_.size() > begin && entries_.back().next == t.next) {
        entries_.back().prob += t.prob;
      } else {
        entries_.push_back(t);
      }
    }
    if (std::abs(total - 1.0) > kSimplexTol) {
      throw InvalidArgument("transition kernel: row " + row_label(r / n_actions, r % n_actions) +
                            " does not sum to 1");
    }
    for (std::size_t i = begin; i < entries_.size(); ++i) entries_[i].prob /= total;
    offsets_.push_back(entries_.size());
  }
}

TransitionKernel TransitionKernel::from_dense(const DenseArray& p) {
  const std::size_t n = p.size();
  if (n == 0 || p[0].empty()) throw InvalidArgument("dense kernel is empty");
  const std::size_t na = p[0].size();
  std::vector<std::vector<Transition>> rows(n * na);
  for (std::size_t s = 0; s < n; ++s) {
    if (p[s].size() != na) throw InvalidArgument("dense kernel: ragged action dimension");
    for (std::size_t a = 0; a < na; ++a) {
      if (p[s][a].size() != n) throw InvalidArgument("dense kernel: ragged successor dimension");
      for (std::size_t t = 0; t < n; ++t) {
        if (p[s][a][t] != 0.0) rows[s * na + a].push_back({t, p[s][a][t]});
      }
    }
  }
  return TransitionKernel(n, na, std::move(rows));
}

TransitionKernel::DenseArray TransitionKernel::to_dense() const {
  DenseArray out(n_states_, std::vector<std::vector<double>>(n_actions_,
                                                             std::vector<double>(n_states_, 0.0)));
  for (std::size_t s = 0; s < n_states_; ++s)
    for (std::size_t a = 0; a < n_actions_; ++a)
      for (const auto& t : row(s, a)) out[s][a][t.next] = t.prob;
  return out;
}

double TransitionKernel::prob(std::size_t s, std::size_t a, std::size_t next) const noexcept {
  for (const auto& t : row(s, a))
    if (t.next == next) return t.prob;
  return 0.0;
}

bool TransitionKernel::approx_equal(const TransitionKernel& other, double tol) const {
  if (n_states_ != other.n_states_ || n_actions_ != other.n_actions_) return false;
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      auto x = row(s, a);
      auto y = other.row(s, a);
      std::size_t i = 0, j = 0;
      while (i < x.size() || j < y.size()) {
        if (j == y.size() || (i < x.size() && x[i].next < y[j].next)) {
          if (x[i++].prob > tol) return false;
        } else if (i == x.size() || y[j].next < x[i].next) {
          if (y[j++].prob > tol) return false;
        } else {
          if (std::abs(x[i++].prob - y[j++].prob) > tol) return false;
        }
      }
    }
  }
  return true;
}

TransitionKernel TransitionKernel::mix(std::span<const TransitionKernel> kernels,
                                       const Vector& weights) {
  if (kernels.empty() || static_cast<std::size_t>(weights.size()) != kernels.size()) {
    throw InvalidArgument("kernel mix: weight count must match kernel count");
  }
  const std::size_t n = kernels[0].n_states();
  const std::size_t na = kernels[0].n_actions();
  for (const auto& kern : kernels) {
    if (kern.n_states() != n || kern.n_actions() != na) {
      throw InvalidArgument("kernel mix: base kernels disagree in shape");
    }
  }
  TransitionKernel out;
  out.n_states_ = n;
  out.n_actions_ = na;
  out.offsets_.reserve(n * na + 1);
  std::vector<double> scratch(n, 0.0);
  std::vector<std::size_t> touched;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      touched.clear();
      for (std::size_t i = 0; i < kernels.size(); ++i) {
        const double w = weights[static_cast<Eigen::Index>(i)];
        if (w == 0.0) continue;
        for (const auto& t : kernels[i].row(s, a)) {
          if (scratch[t.next] == 0.0) touched.push_back(t.next);
          scratch[t.next] += w * t.prob;
        }
      }
      std::sort(touched.begin(), touched.end());
      for (std::size_t next : touched) {
        if (scratch[next] > 0.0) out.entries_.push_back({next, scratch[next]});
        scratch[next] = 0.0;
      }
      out.offsets_.push_back(out.entries_.size());
    }
  }
  return out;
}

Context::Context(Vector c) : c_(std::move(c)) {
  if (c_.size() == 0) throw InvalidContext("context must have at least one entry");
  for (Eigen::Index i = 0; i < c_.size(); ++i) {
    if (!std::isfinite(c_[i]) || c_[i] < -kSimplexTol) {
      throw InvalidContext("context entries must be non-negative");
    }
  }
  const double total = c_.sum();
  if (std::abs(total - 1.0) > kSimplexTol) {
    throw InvalidContext("context entries must sum to 1");
  }
  c_ = c_.cwiseMax(0.0);
  c_ /= c_.sum();
}

ContextualMDP::ContextualMDP(std::vector<TransitionKernel> base_kernels, Matrix features,
                             Vector xi, double gamma)
    : gamma_(gamma) {
  if (base_kernels.empty()) throw InvalidArgument("CMDP needs at least one base kernel");
  n_states_ = base_kernels[0].n_states();
  n_actions_ = base_kernels[0].n_actions();
  for (const auto& kern : base_kernels) {
    if (kern.n_states() != n_states_ || kern.n_actions() != n_actions_) {
      throw InvalidArgument("CMDP base kernels disagree in shape");
    }
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (static_cast<std::size_t>(features.rows()) != n_states_ || features.cols() == 0) {
    throw InvalidArgument("features must be an n_states x k matrix with k >= 1");
  }
  // Features are restricted to [-1, 1] rather than [0, 1] so that distinguished terminal
  // states (e.g. a -1 "unknown outcome" state) can be represented.
  if (!features.allFinite() || features.cwiseAbs().maxCoeff() > 1.0 + kSimplexTol) {
    throw InvalidArgument("features must lie in [-1, 1]");
  }
  if (static_cast<std::size_t>(xi.size()) != n_states_) {
    throw InvalidArgument("xi must have n_states entries");
  }
  if (!xi.allFinite() || xi.minCoeff() < -kSimplexTol || std::abs(xi.sum() - 1.0) > kSimplexTol) {
    throw InvalidArgument("xi must be a distribution over states");
  }
  xi = xi.cwiseMax(0.0);
  xi /= xi.sum();

  bool independent = true;
  for (std::size_t i = 1; i < base_kernels.size() && independent; ++i) {
    independent = base_kernels[i].approx_equal(base_kernels[0], 1e-12);
  }
  kernels_ = std::make_shared<const std::vector<TransitionKernel>>(std::move(base_kernels));
  features_ = std::make_shared<const Matrix>(std::move(features));
  xi_ = std::make_shared<const Vector>(std::move(xi));
  if (independent) shared_kernel_ = std::make_shared<const TransitionKernel>((*kernels_)[0]);
}

std::shared_ptr<const TransitionKernel> ContextualMDP::kernel_for(const Context& c) const {
  if (static_cast<std::size_t>(c.size()) != d()) {
    throw InvalidArgument("context dimension does not match the CMDP");
  }
  if (shared_kernel_) return shared_kernel_;
  return std::make_shared<const TransitionKernel>(TransitionKernel::mix(*kernels_, c.vector()));
}

InstantiatedMDP InstantiatedMDP::with_reward(Vector r) const {
  if (static_cast<std::size_t>(r.size()) != n_states()) {
    throw InvalidArgument("reward must have n_states entries");
  }
  InstantiatedMDP out{kernel, features, xi, gamma, std::move(r)};
  return out;
}

InstantiatedMDP InstantiatedMDP::with_weights(const Vector& w) const {
  if (w.size() != features->cols()) throw InvalidArgument("weight vector must have k entries");
  return with_reward(*features * w);
}

Vector outer_flatten(const Vector& u, const Vector& v) {
  if (u.size() == 0 || v.size() == 0) throw InvalidArgument("outer_flatten of an empty vector");
  Vector out(u.size() * v.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out.segment(i * v.size(), v.size()) = u[i] * v;
  return out;
}

Vector outer_flatten(const ContextualMDP& cmdp, const Vector& u, const Vector& v) {
  if (static_cast<std::size_t>(u.size()) != cmdp.d() ||
      static_cast<std::size_t>(v.size()) != cmdp.k()) {
    throw InvalidArgument("outer_flatten: dimensions do not match the CMDP (d, k)");
  }
  return outer_flatten(u, v);
}

Vector reward_weights(const Matrix& W, const Context& c) {
  if (W.rows() != c.size()) throw InvalidArgument("W rows must equal the context dimension");
  return W.transpose() * c.vector();
}

InstantiatedMDP instantiate(const ContextualMDP& cmdp, const Context& c, const Matrix& W) {
  if (static_cast<std::size_t>(W.rows()) != cmdp.d() ||
      static_cast<std::size_t>(W.cols()) != cmdp.k()) {
    throw InvalidArgument("W must be d x k");
  }
  InstantiatedMDP m;
  m.kernel = cmdp.kernel_for(c);
  m.features = cmdp.shared_features();
  m.xi = cmdp.shared_xi();
  m.gamma = cmdp.gamma();
  m.reward = cmdp.features() * reward_weights(W, c);
  return m;
}

Vector flatten(const Matrix& W) {
  Vector out(W.size());
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) out[i * W.cols() + j] = W(i, j);
  return out;
}

Matrix unflatten(const Vector& w, std::size_t d, std::size_t k) {
  if (static_cast<std::size_t>(w.size()) != d * k) throw InvalidArgument("unflatten: size != d*k");
  Matrix W(d, k);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j)
      W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          w[static_cast<Eigen::Index>(i * k + j)];
  return W;
}

}  // namespace coirl
