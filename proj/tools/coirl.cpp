#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coirl/environments.hpp"
#include "coirl/error.hpp"
#include "coirl/evaluation.hpp"
#include "coirl/harness.hpp"
#include "coirl/io.hpp"
#include "coirl/transfer.hpp"

using namespace coirl;

namespace {

int cmd_gen_env(const std::string& preset, const std::string& out) {
  const Environment env = make_preset(preset);
  io::write_json(out, io::environment_to_json(env));
  std::cout << env.name << ": " << env.cmdp.n_states() << " states, " << env.cmdp.n_actions() << " actions, d="
            << env.cmdp.d() << " k=" << env.cmdp.k() << " -> " << out << '\n';
  return 0;
}

int cmd_train(const std::string& config, const std::vector<std::uint64_t>& seeds, const std::string& output) {
  ExperimentConfig cfg = read_config(config);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!output.empty()) cfg.output = output;
  apply_env_overrides(cfg);
  const auto result = run_experiment(cfg);
  for (const auto& s : result.seeds) {
    std::cout << "seed " << s.seed << ": ";
    if (s.error) {
      std::cout << "failed (" << *s.error << ")\n";
    } else if (s.rows.empty()) {
      std::cout << "no checkpoints\n";
    } else {
      const auto& r = s.rows.back();
      std::cout << "step " << r.step << " demos " << r.n_demos << " rel_value " << r.rel_value << " accuracy "
                << r.accuracy << '\n';
    }
  }
  std::cout << "wrote " << cfg.output.string() << '\n';
  for (const auto& s : result.seeds) {
    if (s.error) return 3;
  }
  return 0;
}

int cmd_eval(const std::string& preset, const std::string& weights, const std::string& bc_model,
             std::size_t holdout, std::uint64_t seed) {
  const Environment env = make_preset(preset);
  const Expert expert(env.cmdp, env.w_star, PlannerConfig{env.planner_tol});
  const Holdout h = Holdout::sample(expert, holdout > 0 ? holdout : env.holdout_size, seed);
  EvalResult r;
  if (!weights.empty()) {
    r = h.evaluate(io::matrix_from_json(io::read_json(weights)));
  } else if (!bc_model.empty()) {
    const BCModel model = io::bc_from_json(io::read_json(bc_model));
    const Matrix& phi = env.cmdp.features();
    r = h.evaluate([&](std::size_t, const Context& c) { return bc_policy(model, phi, c); });
  } else {
    r = h.evaluate(env.w_star);
  }
  io::Json j{{"rel_value", r.rel_value},
             {"accuracy", r.accuracy},
             {"accuracy_uniform", r.accuracy_uniform},
             {"skipped", r.skipped}};
  j["loss"] = std::isnan(r.loss) ? io::Json(nullptr) : io::Json(r.loss);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_transfer(const std::string& preset, std::size_t library_size, std::size_t queries, std::uint64_t seed) {
  const Environment env = make_preset(preset);
  const PlannerConfig planner{env.planner_tol};
  const Expert expert(env.cmdp, env.w_star, planner);
  Rng rng(seed);
  std::vector<Context> contexts;
  for (std::size_t i = 0; i < library_size; ++i) contexts.push_back(sample_context(rng, env.cmdp.d()));
  const auto lib = PolicyLibrary::build(env.cmdp, env.w_star, contexts, planner);
  std::cout << "query,nearest_distance,v_star,v_nearest,bound_nearest,v_gpi\n" << std::setprecision(8);
  for (std::size_t q = 0; q < queries; ++q) {
    const Context c = sample_context(rng, env.cmdp.d());
    const auto sol = expert.solve(c);
    const auto near = nearest_transfer(lib, c);
    const double v_near = reward_weights(env.w_star, c).dot(feature_expectations(sol->mdp, near.policy));
    std::cout << q << ',' << near.distance << ',' << sol->value << ',' << v_near << ',' << near.bound;
    if (!env.cmdp.context_independent()) {
      std::cout << ",\n";
    } else {
      const auto gpi = gpi_policy(lib, c, env.w_star);
      std::cout << ',' << reward_weights(env.w_star, c).dot(feature_expectations(sol->mdp, gpi)) << '\n';
    }
  }
  return 0;
}

int cmd_bench_irl(const std::string& preset, const std::vector<std::size_t>& sizes, std::size_t iterations,
                  std::uint64_t seed, const std::string& out) {
  const auto rows = runtime_sweep(preset, sizes, iterations, seed);
  std::ostringstream os;
  write_runtime_csv(os, rows);
  if (out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream(out, std::ios::binary) << os.str();
    std::cout << "wrote " << out << '\n';
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& metric, const std::string& x,
             const std::string& title, const std::string& out) {
  PlotSpec spec;
  spec.metric = metric;
  spec.x = x;
  spec.title = title;
  std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
  emit_plots(paths, spec, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual inverse reinforcement learning on tabular CMDPs"};
  app.require_subcommand(1);

  std::string preset = "grid:3x4", out, config, output, weights, bc_model, metric = "rel_value", x = "step", title;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> sizes{2, 4, 8, 16, 32};
  std::vector<std::string> csvs;
  std::size_t holdout = 0, library_size = 10, queries = 20, iterations = 20;
  std::uint64_t seed = 999;

  auto* gen = app.add_subcommand("gen-env", "Write an environment preset to JSON");
  gen->add_option("--preset", preset, "grid:NxM, driving[:online|:ellipsoid], synth:S,A,d,k,seed");
  gen->add_option("--out", out, "Output JSON path")->required();

  auto* train = app.add_subcommand("train", "Run an experiment from a JSON config");
  train->add_option("config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--seeds", seeds, "Override the seed list");
  train->add_option("--output", output, "Override the output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a mapping or BC model on a holdout");
  eval->add_option("--preset", preset, "Environment preset");
  eval->add_option("--weights", weights, "d x k mapping as a JSON matrix (default: the true mapping)");
  eval->add_option("--bc", bc_model, "BC model JSON");
  eval->add_option("--holdout", holdout, "Holdout size (0: preset default)");
  eval->add_option("--seed", seed, "Holdout seed");

  auto* transfer = app.add_subcommand("transfer", "Zero-shot transfer from a policy library");
  transfer->add_option("--preset", preset, "Environment preset");
  transfer->add_option("--library-size", library_size, "Library contexts");
  transfer->add_option("--queries", queries, "Query contexts");
  transfer->add_option("--seed", seed, "Seed");

  auto* bench = app.add_subcommand("bench-irl", "Per-iteration runtime of AL on the large MDP vs COIRL");
  bench->add_option("--preset", preset, "Environment preset");
  bench->add_option("--sizes", sizes, "Context-set sizes");
  bench->add_option("--iterations", iterations, "Iterations per size");
  bench->add_option("--seed", seed, "Seed");
  bench->add_option("--out", out, "CSV output (default: stdout)");

  auto* plot = app.add_subcommand("plot", "Render metrics CSVs to SVG");
  plot->add_option("csv", csvs, "Metrics or aggregate CSVs")->required();
  plot->add_option("--metric", metric, "loss, rel_value or accuracy");
  plot->add_option("--x", x, "step or n_demos");
  plot->add_option("--title", title, "Plot title");
  plot->add_option("--out", out, "SVG output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_env(preset, out);
    if (*train) return cmd_train(config, seeds, output);
    if (*eval) return cmd_eval(preset, weights, bc_model, holdout, seed);
    if (*transfer) return cmd_transfer(preset, library_size, queries, seed);
    if (*bench) return cmd_bench_irl(preset, sizes, iterations, seed, out);
    if (*plot) return cmd_plot(csvs, metric, x, title, out);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
