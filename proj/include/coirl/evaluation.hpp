#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "coirl/expert.hpp"
#include "coirl/kernels.hpp"

namespace coirl {

struct EvalResult {
  double loss = std::numeric_limits<double>::quiet_NaN();  ///< NaN for policy sources
  double rel_value = 0.0;
  double accuracy = 0.0;          ///< weighted by the expert's discounted occupancy
  double accuracy_uniform = 0.0;  ///< uniform over states
  std::size_t skipped = 0;        ///< contexts where V* equals the random-policy value
};

/// Per-context evaluation data. The normalized value of a policy is
/// (V - V_rand) / (V* - V_rand) clipped to [0, 1], where V_rand belongs to the uniformly
/// random policy.
struct HoldoutEntry {
  Context context;
  std::shared_ptr<const Expert::Solution> expert;
  double v_rand = 0.0;
  Vector occupancy;
};

using PolicySource = std::function<DeterministicPolicy(std::size_t index, const Context& c)>;

class Holdout {
 public:
  Holdout(const Expert& expert, const std::vector<Context>& contexts,
          kernels::Backend backend = kernels::Backend::kAuto);

  /// n contexts drawn uniformly from the simplex with `seed`.
  static Holdout sample(const Expert& expert, std::size_t n, std::uint64_t seed,
                        kernels::Backend backend = kernels::Backend::kAuto);

  const std::vector<HoldoutEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const Expert& expert() const noexcept { return *expert_; }

  /// Metrics of the greedy policies for mapping W.
  EvalResult evaluate(const Matrix& W) const;
  /// Metrics of arbitrary per-context policies.
  EvalResult evaluate(const PolicySource& policy) const;

  /// Normalized value of `policy` on entry i (NaN when degenerate).
  double rel_value(std::size_t i, const DeterministicPolicy& policy) const;

 private:
  struct Score {
    double loss, rel, acc, acc_uniform;
    bool degenerate;
  };
  Score score(std::size_t i, const DeterministicPolicy& policy, const Matrix* W) const;
  EvalResult reduce(const std::vector<Score>& scores, bool with_loss) const;

  const Expert* expert_;
  std::vector<HoldoutEntry> entries_;
  kernels::Backend backend_;
};

}  // namespace coirl
