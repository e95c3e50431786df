#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coirl/cmdp.hpp"
#include "coirl/kernels.hpp"
#include "coirl/planner.hpp"

namespace coirl {

struct LibraryEntry {
  Context context;
  DeterministicPolicy policy;
  SuccessorFeatures psi;  ///< under P_{context}
  Vector values;          ///< V of `policy` per state, for the library mapping
};

/// Optimal policies for a set of contexts under one mapping W, with successor features.
class PolicyLibrary {
 public:
  PolicyLibrary(ContextualMDP cmdp, Matrix W);

  const ContextualMDP& cmdp() const noexcept { return cmdp_; }
  const Matrix& mapping() const noexcept { return W_; }
  const std::vector<LibraryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Plans for `c` under the library mapping and stores the result.
  void add(const Context& c, const PlannerConfig& cfg = {});
  void add(LibraryEntry entry);

  static PolicyLibrary build(const ContextualMDP& cmdp, const Matrix& W,
                             std::span<const Context> contexts, const PlannerConfig& cfg = {},
                             kernels::Backend backend = kernels::Backend::kAuto);

 private:
  ContextualMDP cmdp_;
  Matrix W_;
  std::vector<LibraryEntry> entries_;
};

LibraryEntry make_library_entry(const ContextualMDP& cmdp, const Matrix& W, const Context& c,
                                const PlannerConfig& cfg = {});

/// pi(s) = argmax_a max_j f_W(c) . psi_j(s,a); lowest (a, j) on ties.
/// Throws UnsupportedDynamics when the dynamics depend on the context.
DeterministicPolicy gpi_policy(const PolicyLibrary& lib, const Context& c, const Matrix& W);

struct TransferBoundInputs {
  double phi_max = 0.0;  ///< max_s ||W phi(s)||_1
  double v_max = 0.0;    ///< max |V| over library contexts and states
  std::size_t d = 1;
  double gamma = 0.0;
  bool context_dependent = true;
};

/// Contextual: 2 (phi_max + gamma d v_max) / (gamma (1-gamma)) dist.
/// Context-independent: 2 phi_max / (1-gamma) dist.
double transfer_bound(const TransferBoundInputs& in, double dist);

/// 2 (1 - gamma + gamma d) / (gamma (1-gamma)^2) dist, the bound for simplex mappings.
double simplex_transfer_bound(std::size_t d, double gamma, double dist);

TransferBoundInputs bound_inputs(const PolicyLibrary& lib);

struct NearestTransfer {
  DeterministicPolicy policy;
  std::size_t index = 0;
  double distance = 0.0;  ///< ||c - c_j||_inf
  double bound = 0.0;
};

/// Reuses the policy of the closest library context (lowest index on ties).
NearestTransfer nearest_transfer(const PolicyLibrary& lib, const Context& c);

/// min_j ||c - c_j||_inf.
double library_distance(const PolicyLibrary& lib, const Context& c);

/// Greedy farthest-point subset of size m (l_inf metric), starting from index 0.
std::vector<std::size_t> farthest_point_subset(std::span<const Context> contexts, std::size_t m);

/// max over queries of the distance to the nearest chosen context.
double covering_radius(std::span<const Context> chosen, std::span<const Context> queries);

}  // namespace coirl
