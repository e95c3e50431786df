#include "coirl/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "coirl/error.hpp"

namespace coirl::io {

namespace {

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("missing JSON field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad JSON field ") + key + ": " + e.what());
  }
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgument("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InvalidArgument("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json cmdp_to_json(const ContextualMDP& cmdp, const Matrix* w_star, const Geometry* geometry) {
  Json j;
  j["n_states"] = cmdp.n_states();
  j["n_actions"] = cmdp.n_actions();
  j["d"] = cmdp.d();
  j["k"] = cmdp.k();
  j["gamma"] = cmdp.gamma();
  j["features"] = matrix_to_json(cmdp.features());
  Json kernels = Json::array();
  for (const auto& p : cmdp.base_kernels()) kernels.push_back(p.to_dense());
  j["base_kernels"] = std::move(kernels);
  j["xi"] = vector_to_json(cmdp.xi());
  if (w_star) j["w_star"] = matrix_to_json(*w_star);
  if (geometry) j["geometry"] = std::string(to_string(*geometry));
  return j;
}

EnvBundle cmdp_from_json(const Json& j) {
  const auto ns = field<std::size_t>(j, "n_states");
  const auto na = field<std::size_t>(j, "n_actions");
  const auto d = field<std::size_t>(j, "d");
  const auto k = field<std::size_t>(j, "k");
  std::vector<TransitionKernel> kernels;
  for (const auto& kj : j.at("base_kernels")) {
    auto dense = kj.get<TransitionKernel::DenseArray>();
    if (dense.size() != ns) throw InvalidArgument("kernel state count != n_states");
    for (const auto& s : dense) {
      if (s.size() != na) throw InvalidArgument("kernel action count != n_actions");
      for (const auto& row : s)
        if (row.size() != ns) throw InvalidArgument("kernel row length != n_states");
    }
    kernels.push_back(TransitionKernel::from_dense(dense));
  }
  if (kernels.size() != d) throw InvalidArgument("number of base kernels != d");
  Matrix phi = matrix_from_json(j.at("features"));
  if (static_cast<std::size_t>(phi.rows()) != ns || static_cast<std::size_t>(phi.cols()) != k) {
    throw InvalidArgument("features must be n_states x k");
  }
  EnvBundle b{ContextualMDP(std::move(kernels), std::move(phi), vector_from_json(j.at("xi")),
                            field<double>(j, "gamma")),
              std::nullopt, std::nullopt, std::nullopt};
  if (j.contains("w_star")) {
    b.w_star = matrix_from_json(j["w_star"]);
    if (static_cast<std::size_t>(b.w_star->rows()) != d || static_cast<std::size_t>(b.w_star->cols()) != k) {
      throw InvalidArgument("w_star must be d x k");
    }
  }
  if (j.contains("geometry")) b.geometry = parse_geometry(j["geometry"].get<std::string>());
  if (j.contains("library")) b.library = j["library"];
  return b;
}

Json environment_to_json(const Environment& env) {
  Json j = cmdp_to_json(env.cmdp, &env.w_star, &env.w_geometry);
  j["name"] = env.name;
  j["holdout_size"] = env.holdout_size;
  j["planner_tol"] = env.planner_tol;
  return j;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

Json demo_to_json(const Demonstration& demo) {
  Json j;
  j["context"] = vector_to_json(demo.context.vector());
  j["scheme"] = std::string(to_string(demo.scheme));
  if (demo.scheme == DemoScheme::kExact) {
    j["mu"] = vector_to_json(demo.mu);
  } else {
    j["states"] = demo.trajectory.states;
    j["actions"] = demo.trajectory.actions;
  }
  return j;
}

Demonstration demo_from_json(const Json& j, const ContextualMDP& cmdp) {
  Context c(vector_from_json(j.at("context")));
  if (static_cast<std::size_t>(c.size()) != cmdp.d()) throw InvalidArgument("demo context dimension != d");
  const DemoScheme scheme = j.contains("scheme") ? parse_demo_scheme(j["scheme"].get<std::string>())
                                                 : (j.contains("mu") ? DemoScheme::kExact : DemoScheme::kFixedHorizon);
  if (scheme == DemoScheme::kExact) {
    Vector mu = vector_from_json(j.at("mu"));
    if (static_cast<std::size_t>(mu.size()) != cmdp.k()) throw InvalidArgument("demo mu dimension != k");
    return Demonstration{std::move(c), scheme, {}, std::move(mu)};
  }
  Trajectory traj{field<std::vector<std::size_t>>(j, "states"), field<std::vector<std::size_t>>(j, "actions")};
  if (traj.states.empty()) throw InvalidArgument("trajectory has no states");
  for (std::size_t s : traj.states)
    if (s >= cmdp.n_states()) throw InvalidArgument("trajectory state out of range");
  for (std::size_t a : traj.actions)
    if (a >= cmdp.n_actions()) throw InvalidArgument("trajectory action out of range");
  Vector mu = estimate_feature_expectations(cmdp.features(), cmdp.gamma(), scheme, traj);
  return Demonstration{std::move(c), scheme, std::move(traj), std::move(mu)};
}

void write_demos_jsonl(std::ostream& os, std::span<const Demonstration> demos) {
  for (const auto& d : demos) os << demo_to_json(d).dump() << '\n';
}

std::vector<Demonstration> read_demos_jsonl(std::istream& is, const ContextualMDP& cmdp) {
  std::vector<Demonstration> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(demo_from_json(Json::parse(line), cmdp));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("demos line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Json bc_to_json(const BCModel& model) {
  return Json{{"weights", matrix_to_json(model.weights)},
              {"n_actions", model.n_actions()},
              {"n_inputs", model.weights.cols()},
              {"feature_map", std::string(to_string(model.feature_map))},
              {"seed", model.seed}};
}

BCModel bc_from_json(const Json& j) {
  BCModel m;
  m.weights = matrix_from_json(j.at("weights"));
  m.feature_map = parse_bc_feature_map(field<std::string>(j, "feature_map"));
  m.seed = field<std::uint64_t>(j, "seed");
  return m;
}

Json library_to_json(const PolicyLibrary& lib) {
  Json entries = Json::array();
  for (const auto& e : lib.entries()) {
    entries.push_back({{"context", vector_to_json(e.context.vector())}, {"policy", e.policy.actions}});
  }
  return Json{{"mapping", matrix_to_json(lib.mapping())}, {"entries", std::move(entries)}};
}

PolicyLibrary library_from_json(const Json& j, const ContextualMDP& cmdp) {
  PolicyLibrary lib(cmdp, matrix_from_json(j.at("mapping")));
  for (const auto& ej : j.at("entries")) {
    Context c(vector_from_json(ej.at("context")));
    DeterministicPolicy pi{field<std::vector<std::size_t>>(ej, "policy")};
    const auto mdp = instantiate(cmdp, c, lib.mapping());
    auto psi = successor_features(mdp, pi);
    Vector values = policy_values(mdp, pi);
    lib.add(LibraryEntry{std::move(c), std::move(pi), std::move(psi), std::move(values)});
  }
  return lib;
}

}  // namespace coirl::io
