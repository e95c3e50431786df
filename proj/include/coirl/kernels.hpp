#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a serial twin with the same
// arithmetic order per output element; tests assert the two agree bit for bit.

#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#include "coirl/cmdp.hpp"

namespace coirl::kernels {

enum class Backend { kAuto, kSerial, kOpenMP };

/// Below this many states the OpenMP sweep costs more than it saves.
inline constexpr std::size_t kParallelStateThreshold = 512;

bool openmp_enabled() noexcept;
int max_threads() noexcept;

/// out(s) = r(s) + gamma * max_a sum_s' P(s'|s,a) in(s'). Returns ||out - in||_inf.
double bellman_sweep_serial(const TransitionKernel& p, const Vector& reward, double gamma,
                            const Vector& in, Vector& out);
double bellman_sweep_omp(const TransitionKernel& p, const Vector& reward, double gamma,
                         const Vector& in, Vector& out);

/// Greedy action per state w.r.t. `values`, lowest index on exact ties.
void greedy_serial(const TransitionKernel& p, const Vector& reward, double gamma,
                   const Vector& values, std::vector<std::size_t>& policy);
void greedy_omp(const TransitionKernel& p, const Vector& reward, double gamma,
                const Vector& values, std::vector<std::size_t>& policy);

inline bool use_parallel(Backend b, std::size_t n) {
  if (b == Backend::kSerial) return false;
  if (b == Backend::kOpenMP) return true;
  return n >= kParallelStateThreshold && openmp_enabled() && max_threads() > 1;
}

/// results[i] = fn(i) for i in [0, n), evaluated in index order.
template <class Fn>
auto map_serial(std::size_t n, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
  return out;
}

/// results[i] = fn(i), items spread over OpenMP threads. The lowest-index exception, if
/// any, is rethrown after the loop. Results are independent of the thread count.
template <class Fn>
auto map_omp(std::size_t n, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      slots[static_cast<std::size_t>(i)].emplace(fn(static_cast<std::size_t>(i)));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

template <class Fn>
auto map(Backend b, std::size_t n, Fn&& fn) {
  const bool parallel = b == Backend::kOpenMP ||
                        (b == Backend::kAuto && openmp_enabled() && max_threads() > 1 && n > 1);
  return parallel ? map_omp(n, std::forward<Fn>(fn)) : map_serial(n, std::forward<Fn>(fn));
}

}  // namespace coirl::kernels
