#include "coirl/planner.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "coirl/error.hpp"

namespace coirl {

namespace {

// Small systems go through a dense LU, larger ones through a sparse LU of the same matrix.
constexpr std::size_t kDenseSolveLimit = 256;

using SparseMatrix = Eigen::SparseMatrix<double>;

// Row-stochastic transition operator of a (possibly stochastic) policy: sum over actions
// weighted by `action_weight(s, a)`.
template <class Weight>
SparseMatrix policy_operator(const TransitionKernel& p, Weight action_weight) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(p.nnz());
  for (std::size_t s = 0; s < p.n_states(); ++s) {
    for (std::size_t a = 0; a < p.n_actions(); ++a) {
      const double w = action_weight(s, a);
      if (w == 0.0) continue;
      for (const auto& t : p.row(s, a)) {
        triplets.emplace_back(static_cast<int>(s), static_cast<int>(t.next), w * t.prob);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(p.n_states());
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

// Solves (I - gamma P) X = B, or its transpose.
Matrix solve_resolvent(const SparseMatrix& p, double gamma, const Matrix& rhs, bool transpose) {
  const auto n = p.rows();
  SparseMatrix a(n, n);
  a.setIdentity();
  a -= gamma * p;
  if (transpose) a = SparseMatrix(a.transpose());
  Matrix x;
  if (static_cast<std::size_t>(n) <= kDenseSolveLimit) {
    Eigen::PartialPivLU<Matrix> lu{Matrix(a)};
    x = lu.solve(rhs);
  } else {
    a.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed");
    x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericalError("sparse LU solve failed");
  }
  if (!x.allFinite()) throw NumericalError("policy evaluation produced non-finite values");
  return x;
}

SparseMatrix deterministic_operator(const InstantiatedMDP& mdp, const DeterministicPolicy& policy) {
  if (policy.size() != mdp.n_states()) throw InvalidArgument("policy size != n_states");
  for (std::size_t a : policy.actions) {
    if (a >= mdp.n_actions()) throw InvalidArgument("policy action index out of range");
  }
  return policy_operator(*mdp.kernel,
                         [&](std::size_t s, std::size_t a) { return policy[s] == a ? 1.0 : 0.0; });
}

}  // namespace

PlanResult value_iteration(const InstantiatedMDP& mdp, const PlannerConfig& cfg,
                           const Vector* warm_start) {
  if (!(cfg.tol > 0.0)) throw InvalidArgument("planner tolerance must be positive");
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  if (mdp.reward.size() != n) throw InvalidArgument("reward size != n_states");
  const bool parallel = kernels::use_parallel(cfg.backend, mdp.n_states());

  Vector v = warm_start ? *warm_start : Vector::Zero(n);
  if (v.size() != n) throw InvalidArgument("warm start size != n_states");
  Vector next(n);
  double residual = 0.0;
  std::size_t it = 0;
  while (true) {
    if (it >= cfg.max_iters) {
      std::ostringstream os;
      os << "value iteration did not converge in " << cfg.max_iters
         << " iterations (residual " << residual << ")";
      throw NonConvergence(os.str(), residual);
    }
    residual = parallel ? kernels::bellman_sweep_omp(*mdp.kernel, mdp.reward, mdp.gamma, v, next)
                        : kernels::bellman_sweep_serial(*mdp.kernel, mdp.reward, mdp.gamma, v, next);
    v.swap(next);
    ++it;
    if (residual < cfg.tol) break;
  }
  PlanResult out;
  out.values = std::move(v);
  out.iterations = it;
  out.residual = residual;
  if (parallel) {
    kernels::greedy_omp(*mdp.kernel, mdp.reward, mdp.gamma, out.values, out.policy.actions);
  } else {
    kernels::greedy_serial(*mdp.kernel, mdp.reward, mdp.gamma, out.values, out.policy.actions);
  }
  return out;
}

Matrix state_feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy) {
  return solve_resolvent(deterministic_operator(mdp, policy), mdp.gamma, *mdp.features, false);
}

Vector feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                            const Vector& start) {
  if (static_cast<std::size_t>(start.size()) != mdp.n_states()) {
    throw InvalidArgument("start distribution size != n_states");
  }
  return state_feature_expectations(mdp, policy).transpose() * start;
}

Vector feature_expectations(const InstantiatedMDP& mdp, const DeterministicPolicy& policy) {
  return feature_expectations(mdp, policy, *mdp.xi);
}

Vector uniform_policy_feature_expectations(const InstantiatedMDP& mdp, const Vector& start) {
  const double w = 1.0 / static_cast<double>(mdp.n_actions());
  const auto op = policy_operator(*mdp.kernel, [w](std::size_t, std::size_t) { return w; });
  return solve_resolvent(op, mdp.gamma, *mdp.features, false).transpose() * start;
}

Vector policy_values(const InstantiatedMDP& mdp, const DeterministicPolicy& policy) {
  return solve_resolvent(deterministic_operator(mdp, policy), mdp.gamma, mdp.reward, false).col(0);
}

Vector discounted_occupancy(const InstantiatedMDP& mdp, const DeterministicPolicy& policy,
                            const Vector& start) {
  return (1.0 - mdp.gamma) *
         solve_resolvent(deterministic_operator(mdp, policy), mdp.gamma, start, true).col(0);
}

Matrix q_values(const InstantiatedMDP& mdp, const Vector& values) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  if (values.size() != n) throw InvalidArgument("values size != n_states");
  Matrix q(n, static_cast<Eigen::Index>(mdp.n_actions()));
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double ev = 0.0;
      for (const auto& t : mdp.kernel->row(s, a)) ev += t.prob * values[static_cast<Eigen::Index>(t.next)];
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          mdp.reward[static_cast<Eigen::Index>(s)] + mdp.gamma * ev;
    }
  }
  return q;
}

DeterministicPolicy greedy_policy(const Matrix& q) {
  DeterministicPolicy pi;
  pi.actions.resize(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    pi.actions[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best);
  }
  return pi;
}

SuccessorFeatures::SuccessorFeatures(std::size_t n_states, std::size_t n_actions, Matrix rows)
    : n_states_(n_states), n_actions_(n_actions), rows_(std::move(rows)) {
  if (static_cast<std::size_t>(rows_.rows()) != n_states * n_actions) {
    throw InvalidArgument("successor features: expected n_states * n_actions rows");
  }
}

Matrix SuccessorFeatures::q_for(const Vector& w) const {
  if (static_cast<std::size_t>(w.size()) != k()) throw InvalidArgument("weight size != k");
  const Vector flat = rows_ * w;
  Matrix q(static_cast<Eigen::Index>(n_states_), static_cast<Eigen::Index>(n_actions_));
  for (std::size_t s = 0; s < n_states_; ++s)
    for (std::size_t a = 0; a < n_actions_; ++a)
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          flat[static_cast<Eigen::Index>(s * n_actions_ + a)];
  return q;
}

SuccessorFeatures successor_features(const InstantiatedMDP& mdp, const DeterministicPolicy& policy) {
  const Matrix mu = state_feature_expectations(mdp, policy);
  const Matrix& phi = *mdp.features;
  const std::size_t na = mdp.n_actions();
  Matrix rows(static_cast<Eigen::Index>(mdp.n_states() * na), phi.cols());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(phi.cols());
      for (const auto& t : mdp.kernel->row(s, a)) next += t.prob * mu.row(static_cast<Eigen::Index>(t.next));
      rows.row(static_cast<Eigen::Index>(s * na + a)) =
          phi.row(static_cast<Eigen::Index>(s)) + mdp.gamma * next;
    }
  }
  return SuccessorFeatures(mdp.n_states(), na, std::move(rows));
}

}  // namespace coirl
