#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "coirl/baselines.hpp"
#include "coirl/environments.hpp"
#include "coirl/expert.hpp"
#include "coirl/transfer.hpp"

namespace coirl::io {

using Json = nlohmann::json;

/// Environment bundle: the CMDP plus optional ground-truth mapping and policy library.
struct EnvBundle {
  ContextualMDP cmdp;
  std::optional<Matrix> w_star;
  std::optional<Geometry> geometry;
  std::optional<Json> library;
};

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json cmdp_to_json(const ContextualMDP& cmdp, const Matrix* w_star = nullptr,
                  const Geometry* geometry = nullptr);
EnvBundle cmdp_from_json(const Json& j);

Json environment_to_json(const Environment& env);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

Json demo_to_json(const Demonstration& demo);
/// Trajectory records recompute mu_hat from the CMDP's features and discount.
Demonstration demo_from_json(const Json& j, const ContextualMDP& cmdp);
void write_demos_jsonl(std::ostream& os, std::span<const Demonstration> demos);
std::vector<Demonstration> read_demos_jsonl(std::istream& is, const ContextualMDP& cmdp);

Json bc_to_json(const BCModel& model);
BCModel bc_from_json(const Json& j);

Json library_to_json(const PolicyLibrary& lib);
/// Successor features are recomputed from the stored policies.
PolicyLibrary library_from_json(const Json& j, const ContextualMDP& cmdp);

}  // namespace coirl::io
