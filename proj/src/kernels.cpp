#include "coirl/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coirl::kernels {

bool openmp_enabled() noexcept {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

inline double best_backup(const TransitionKernel& p, std::size_t s, double gamma,
                          const Vector& v, std::size_t* best_action) {
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t a = 0; a < p.n_actions(); ++a) {
    double ev = 0.0;
    for (const auto& t : p.row(s, a)) ev += t.prob * v[static_cast<Eigen::Index>(t.next)];
    const double q = gamma * ev;
    if (a == 0 || q > best) {
      best = q;
      arg = a;
    }
  }
  if (best_action) *best_action = arg;
  return best;
}

}  // namespace

double bellman_sweep_serial(const TransitionKernel& p, const Vector& reward, double gamma,
                            const Vector& in, Vector& out) {
  const std::size_t n = p.n_states();
  out.resize(static_cast<Eigen::Index>(n));
  double delta = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    out[i] = reward[i] + best_backup(p, s, gamma, in, nullptr);
    delta = std::max(delta, std::abs(out[i] - in[i]));
  }
  return delta;
}

double bellman_sweep_omp(const TransitionKernel& p, const Vector& reward, double gamma,
                         const Vector& in, Vector& out) {
  const auto n = static_cast<long long>(p.n_states());
  out.resize(static_cast<Eigen::Index>(n));
  double delta = 0.0;
#pragma omp parallel for reduction(max : delta) schedule(static)
  for (long long s = 0; s < n; ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    out[i] = reward[i] + best_backup(p, static_cast<std::size_t>(s), gamma, in, nullptr);
    delta = std::max(delta, std::abs(out[i] - in[i]));
  }
  return delta;
}

void greedy_serial(const TransitionKernel& p, const Vector& reward, double gamma,
                   const Vector& values, std::vector<std::size_t>& policy) {
  (void)reward;  // constant across actions
  policy.resize(p.n_states());
  for (std::size_t s = 0; s < p.n_states(); ++s) best_backup(p, s, gamma, values, &policy[s]);
}

void greedy_omp(const TransitionKernel& p, const Vector& reward, double gamma,
                const Vector& values, std::vector<std::size_t>& policy) {
  (void)reward;
  policy.resize(p.n_states());
  const auto n = static_cast<long long>(p.n_states());
#pragma omp parallel for schedule(static)
  for (long long s = 0; s < n; ++s) {
    best_backup(p, static_cast<std::size_t>(s), gamma, values, &policy[static_cast<std::size_t>(s)]);
  }
}

}  // namespace coirl::kernels
