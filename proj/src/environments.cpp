#include "coirl/environments.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <vector>

#include "coirl/error.hpp"

namespace coirl {

Environment make_gridworld(const GridWorldSpec& spec) {
  const std::size_t n = spec.n, m = spec.m, ns = n * m;
  if (n == 0 || m == 0 || ns < 2) throw InvalidArgument("grid world needs at least two cells");
  std::vector<std::vector<Transition>> rows;
  rows.reserve(ns * 4);
  for (std::size_t y = 0; y < m; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      rows.push_back({{y * n + (x + n - 1) % n, 1.0}});
      rows.push_back({{((y + m - 1) % m) * n + x, 1.0}});
      rows.push_back({{y * n + (x + 1) % n, 1.0}});
      rows.push_back({{((y + 1) % m) * n + x, 1.0}});
    }
  }
  TransitionKernel p(ns, 4, std::move(rows));
  std::vector<TransitionKernel> kernels(ns, p);
  const auto dim = static_cast<Eigen::Index>(ns);
  Vector xi = Vector::Constant(dim, 1.0 / static_cast<double>(ns));
  ContextualMDP cmdp(std::move(kernels), Matrix::Identity(dim, dim), std::move(xi), spec.gamma);
  return Environment{"grid:" + std::to_string(n) + "x" + std::to_string(m), std::move(cmdp),
                     Matrix::Identity(dim, dim), Geometry::kLinfBox, 100, 1e-4};
}

namespace driving {

std::size_t index(const State& s) {
  return 1 + ((s.speed * kXPositions + s.x) * kLanes + s.lane_b) * kYPositions + s.y_b;
}

State decode(std::size_t i) {
  std::size_t r = i - 1;
  State s{};
  s.y_b = r % kYPositions;
  r /= kYPositions;
  s.lane_b = r % kLanes;
  r /= kLanes;
  s.x = r % kXPositions;
  s.speed = r / kXPositions;
  return s;
}

bool on_road(std::size_t x) { return x >= kRoadFirstX && x < kRoadFirstX + kLanes * kLaneWidth; }

std::size_t lane_of(std::size_t x) { return (x - kRoadFirstX) / kLaneWidth; }

bool collision(const State& s) { return on_road(s.x) && lane_of(s.x) == s.lane_b && s.y_b <= 1; }

}  // namespace driving

Matrix driving_w_star(DrivingPreset preset) {
  if (preset == DrivingPreset::kEllipsoid) {
    return (Matrix(3, 3) << -1, 0.75, 0.75, 0.5, -1, 1, 0.75, 1, -0.75).finished();
  }
  return (Matrix(3, 3) << 0.043, 0, 0.043, 0, 0.434, 0, 0.043, 0.434, 0).finished();
}

Environment make_driving(const DrivingSpec& spec) {
  using namespace driving;
  std::vector<std::vector<Transition>> rows(kStates * 2);
  Matrix phi(static_cast<Eigen::Index>(kStates), 3);

  // Speed selection: left picks the slowest speed, right the fastest. Car B enters at the
  // top in a uniformly random lane.
  for (std::size_t a = 0; a < 2; ++a) {
    const std::size_t speed = a == 0 ? 0 : kSpeeds - 1;
    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      rows[a].push_back({index({kStartX, speed, lane, kYPositions - 1}), 1.0 / kLanes});
    }
  }
  phi.row(0) << 0.0, 0.5, 0.5;

  for (std::size_t i = 1; i < kStates; ++i) {
    const State s = decode(i);
    phi.row(static_cast<Eigen::Index>(i)) << static_cast<double>(s.speed + 1) / kSpeeds,
        collision(s) ? 0.0 : 0.5, on_road(s.x) ? 0.5 : 0.0;
    const std::size_t advance = s.speed;  // car B is one speed unit slower than car A
    for (std::size_t a = 0; a < 2; ++a) {
      const std::size_t x = a == 0 ? (s.x == 0 ? 0 : s.x - 1) : std::min(s.x + 1, kXPositions - 1);
      auto& row = rows[i * 2 + a];
      if (s.y_b >= advance) {
        row.push_back({index({x, s.speed, s.lane_b, s.y_b - advance}), 1.0});
      } else {
        for (std::size_t lane = 0; lane < kLanes; ++lane)
          row.push_back({index({x, s.speed, lane, kYPositions - 1}), 1.0 / kLanes});
      }
    }
  }
  TransitionKernel p(kStates, 2, std::move(rows));
  Vector xi = Vector::Zero(static_cast<Eigen::Index>(kStates));
  xi[0] = 1.0;
  ContextualMDP cmdp(std::vector<TransitionKernel>(3, p), std::move(phi), std::move(xi), spec.gamma);
  const bool ellipsoid = spec.preset == DrivingPreset::kEllipsoid;
  return Environment{ellipsoid ? "driving:ellipsoid" : "driving", std::move(cmdp),
                     driving_w_star(spec.preset),
                     Geometry::kLinfBox, 80, 1e-4};
}

Context sample_context(Rng& rng, std::size_t d) {
  if (d == 0) throw InvalidArgument("context dimension must be positive");
  std::exponential_distribution<double> e(1.0);
  Vector c(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = e(rng);
  c /= c.sum();
  return Context(std::move(c));
}

Environment make_random_cmdp(const SyntheticCMDPSpec& spec) {
  if (spec.d < 2) throw InvalidArgument("synthetic CMDP needs d >= 2");
  if (spec.n_states <= spec.terminal_count || spec.n_actions == 0 || spec.k == 0) {
    throw InvalidArgument("synthetic CMDP dimensions are inconsistent");
  }
  if (spec.branching == 0) throw InvalidArgument("branching must be positive");
  Rng rng(spec.seed);
  const std::size_t ns = spec.n_states, na = spec.n_actions;
  const std::size_t first_terminal = ns - spec.terminal_count;
  const std::size_t branching = std::min(spec.branching, ns);
  std::gamma_distribution<double> gam(spec.dirichlet_alpha, 1.0);

  std::vector<std::size_t> order(ns);
  std::vector<TransitionKernel> kernels;
  for (std::size_t i = 0; i < spec.d; ++i) {
    std::vector<std::vector<Transition>> rows;
    rows.reserve(ns * na);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        if (s >= first_terminal) {
          rows.push_back({{s, 1.0}});
          continue;
        }
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t j = 0; j < branching; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, ns - 1);
          std::swap(order[j], order[pick(rng)]);
        }
        std::vector<Transition> row;
        double z = 0.0;
        for (std::size_t j = 0; j < branching; ++j) {
          const double w = gam(rng) + 1e-12;
          row.push_back({order[j], w});
          z += w;
        }
        for (auto& t : row) t.prob /= z;
        rows.push_back(std::move(row));
      }
    }
    kernels.emplace_back(ns, na, std::move(rows));
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix phi(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(spec.k));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t j = 0; j < spec.k; ++j) {
      double v = unif(rng);
      // terminal states alternate between all-ones and all-zeros feature vectors
      if (s >= first_terminal) v = (s - first_terminal) % 2 == 0 ? 1.0 : 0.0;
      phi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = v;
    }
  }
  Vector xi = Vector::Zero(static_cast<Eigen::Index>(ns));
  xi.head(static_cast<Eigen::Index>(first_terminal)).setConstant(1.0 / static_cast<double>(first_terminal));
  Matrix w = sample_in_geometry(rng, spec.d, spec.k, spec.geometry);
  ContextualMDP cmdp(std::move(kernels), std::move(phi), std::move(xi), spec.gamma);
  const std::string name = "synth:" + std::to_string(ns) + "," + std::to_string(na) + "," +
                           std::to_string(spec.d) + "," + std::to_string(spec.k) + "," +
                           std::to_string(spec.seed);
  return Environment{name, std::move(cmdp), std::move(w), spec.geometry, 300, 1e-3};
}

namespace {

std::vector<std::uint64_t> parse_numbers(std::string_view text, char sep, std::string_view preset) {
  std::vector<std::uint64_t> out;
  while (true) {
    const auto pos = text.find(sep);
    const auto part = text.substr(0, pos);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
      throw InvalidArgument("malformed preset: " + std::string(preset));
    }
    out.push_back(v);
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return out;
}

}  // namespace

Environment make_preset(std::string_view name) {
  if (name == "driving" || name == "driving:online") return make_driving({});
  if (name == "driving:ellipsoid") return make_driving({0.9, DrivingPreset::kEllipsoid});
  if (name.starts_with("grid:")) {
    const auto dims = parse_numbers(name.substr(5), 'x', name);
    if (dims.size() != 2) throw InvalidArgument("grid preset must be grid:NxM");
    return make_gridworld({dims[0], dims[1], 0.9});
  }
  if (name.starts_with("synth:")) {
    const auto v = parse_numbers(name.substr(6), ',', name);
    if (v.size() != 5) throw InvalidArgument("synth preset must be synth:S,A,d,k,seed");
    SyntheticCMDPSpec spec;
    spec.n_states = v[0];
    spec.n_actions = v[1];
    spec.d = v[2];
    spec.k = v[3];
    spec.seed = v[4];
    return make_random_cmdp(spec);
  }
  throw InvalidArgument("unknown environment preset: " + std::string(name));
}

}  // namespace coirl
