#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coirl/baselines.hpp"
#include "coirl/expert.hpp"
#include "coirl/io.hpp"
#include "coirl/loss.hpp"

namespace coirl {

enum class Learner { kPSGD, kEW, kES, kEllipsoid, kBatchEllipsoid, kALLarge, kMWAL, kBC };

std::string_view to_string(Learner l);
Learner parse_learner(std::string_view name);

struct ExperimentConfig {
  std::string env = "grid:3x4";
  Learner learner = Learner::kPSGD;
  DemoScheme scheme = DemoScheme::kExact;
  std::optional<std::size_t> horizon;  ///< fixed-horizon length (default 40)
  std::size_t T = 200;                 ///< iterations, rounds or epochs depending on the learner
  std::size_t batch_size = 1;
  std::vector<std::uint64_t> seeds{0};
  std::size_t holdout = 0;             ///< 0: the environment's default
  std::uint64_t holdout_seed = 999;
  std::size_t eval_every = 10;
  std::filesystem::path output = "runs/out";
  /// Offline mode when positive: a fixed training set of this many contexts, one
  /// demonstration each. Required by al-large, mwal and bc.
  std::size_t train_contexts = 0;
  double eps = 0.1;                    ///< ellipsoid tolerance
  double delta = 0.1;                  ///< batch-ellipsoid confidence
  ESConfig es;
  double es_alpha = 0.1;
  double es_decay = 0.95;
  bool es_normalize_step = true;
  bool es_accept_if_decrease = true;
  BCConfig bc;
  bool timing = false;                 ///< record wall_ms (breaks byte-for-byte reruns)

  void validate() const;
};

io::Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const io::Json& j);
ExperimentConfig read_config(const std::filesystem::path& path);

/// COIRL_SEED, when set, replaces the seed list by that single seed.
void apply_env_overrides(ExperimentConfig& cfg);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct MetricsRow {
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::size_t n_demos = 0;
  double loss = 0.0;
  double rel_value = 0.0;
  double accuracy = 0.0;
  double wall_ms = 0.0;
};

inline constexpr std::string_view kMetricsHeader = "step,seed,n_demos,loss,rel_value,accuracy,wall_ms";
inline constexpr std::string_view kAggregateHeader =
    "step,n_demos,seeds,loss_mean,loss_std,rel_value_mean,rel_value_std,accuracy_mean,accuracy_std,"
    "wall_ms_mean,wall_ms_std";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& is);

struct AggregateRow {
  std::size_t step = 0;
  std::size_t n_demos = 0;
  std::size_t seeds = 0;
  double loss_mean = 0.0, loss_std = 0.0;
  double rel_value_mean = 0.0, rel_value_std = 0.0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double wall_ms_mean = 0.0, wall_ms_std = 0.0;
};

/// Groups rows of all seeds by step; std is the sample standard deviation (0 for one seed).
std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRow>>& per_seed);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::optional<std::string> error;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::vector<AggregateRow> aggregate;
  io::Json manifest;
};

/// One seed of an experiment, fully determined by (cfg, seed).
std::vector<MetricsRow> run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed (in parallel), writes seed_<s>.csv, aggregate.csv and manifest.json into
/// cfg.output. A failing seed is recorded in the manifest; the rest proceed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true);

struct RuntimeRow {
  std::size_t contexts = 0;
  double al_ms = 0.0;     ///< median per-iteration time of AL on the large MDP
  double coirl_ms = 0.0;  ///< median per-iteration time of a PSGD step
  std::size_t al_iterations = 0;
};

inline constexpr std::string_view kRuntimeHeader = "contexts,al_ms,coirl_ms,al_iterations";

/// Per-iteration wall time of AL on the stacked MDP and of COIRL for each context-set size.
std::vector<RuntimeRow> runtime_sweep(std::string_view env, const std::vector<std::size_t>& sizes,
                                      std::size_t iterations, std::uint64_t seed);
void write_runtime_csv(std::ostream& os, const std::vector<RuntimeRow>& rows);

double median(std::vector<double> v);

struct PlotSpec {
  std::string metric = "rel_value";  ///< loss, rel_value or accuracy
  std::string x = "step";            ///< step or n_demos
  std::string title;
  int width = 640;
  int height = 400;
};

/// Renders one SVG with a line per CSV. Metrics CSVs with several seeds and aggregate CSVs
/// get a +-1 std band; single-seed CSVs a bare line. Throws InvalidArgument naming the
/// first missing column.
std::string render_svg(const std::vector<std::filesystem::path>& csvs, const PlotSpec& spec);
void emit_plots(const std::vector<std::filesystem::path>& csvs, const PlotSpec& spec,
                const std::filesystem::path& out);

}  // namespace coirl
