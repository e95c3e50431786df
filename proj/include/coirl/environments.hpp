#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "coirl/cmdp.hpp"
#include "coirl/geometry.hpp"
#include "coirl/rng.hpp"

namespace coirl {

/// A generated CMDP together with its ground-truth mapping and evaluation defaults.
struct Environment {
  std::string name;
  ContextualMDP cmdp;
  Matrix w_star;
  Geometry w_geometry;
  std::size_t holdout_size;
  double planner_tol;
};

struct GridWorldSpec {
  std::size_t n = 3;  ///< columns
  std::size_t m = 4;  ///< rows
  double gamma = 0.9;
};

enum class GridAction : std::size_t { kLeft = 0, kUp = 1, kRight = 2, kDown = 3 };

/// Deterministic cyclic grid, one-hot features, d = k = n*m, W* = I.
Environment make_gridworld(const GridWorldSpec& spec);

enum class DrivingPreset { kEllipsoid, kOnline };

struct DrivingSpec {
  double gamma = 0.9;
  DrivingPreset preset = DrivingPreset::kOnline;
};

namespace driving {

inline constexpr std::size_t kXPositions = 17;
inline constexpr std::size_t kSpeeds = 3;
inline constexpr std::size_t kLanes = 3;
inline constexpr std::size_t kYPositions = 10;
inline constexpr std::size_t kRoadFirstX = 4;   // road covers x in [4, 12]
inline constexpr std::size_t kLaneWidth = 3;
inline constexpr std::size_t kStartX = 8;
inline constexpr std::size_t kStates = 1 + kXPositions * kSpeeds * kLanes * kYPositions;

struct State {
  std::size_t x, speed, lane_b, y_b;
};

std::size_t index(const State& s);
State decode(std::size_t index);  ///< index >= 1
bool on_road(std::size_t x);
std::size_t lane_of(std::size_t x);  ///< only meaningful on the road
bool collision(const State& s);

}  // namespace driving

Matrix driving_w_star(DrivingPreset preset);

/// 1531-state highway: a speed-selection state followed by (x, speed, lane_b, y_b) states.
/// Actions {steer-left, steer-right}; features (speed, collision, off-road).
Environment make_driving(const DrivingSpec& spec);

struct SyntheticCMDPSpec {
  std::size_t n_states = 40;
  std::size_t n_actions = 4;
  std::size_t d = 5;
  std::size_t k = 5;
  std::size_t terminal_count = 2;
  std::uint64_t seed = 0;
  double gamma = 0.9;
  std::size_t branching = 4;      ///< successors per (s, a) row
  double dirichlet_alpha = 1.0;   ///< concentration of each row
  Geometry geometry = Geometry::kEuclideanBall;
};

/// Random contextual-dynamics CMDP: d Dirichlet base kernels, uniform features, absorbing
/// terminal states with fixed features, W* drawn from `geometry`.
Environment make_random_cmdp(const SyntheticCMDPSpec& spec);

/// Uniform draw from the simplex via normalized exponentials.
Context sample_context(Rng& rng, std::size_t d);

/// "grid:NxM", "driving", "driving:ellipsoid", "driving:online", "synth:S,A,d,k,seed".
Environment make_preset(std::string_view name);

}  // namespace coirl
