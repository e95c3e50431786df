#include "coirl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "coirl/descent.hpp"
#include "coirl/ellipsoid.hpp"
#include "coirl/environments.hpp"
#include "coirl/error.hpp"
#include "coirl/evaluation.hpp"
#include "coirl/kernels.hpp"

#ifndef COIRL_VERSION
#define COIRL_VERSION "0.0.0"
#endif

namespace coirl {

namespace {

constexpr std::pair<Learner, std::string_view> kLearners[] = {
    {Learner::kPSGD, "psgd"},         {Learner::kEW, "ew"},
    {Learner::kES, "es"},             {Learner::kEllipsoid, "ellipsoid"},
    {Learner::kBatchEllipsoid, "batch-ellipsoid"},
    {Learner::kALLarge, "al-large"},  {Learner::kMWAL, "mwal"},
    {Learner::kBC, "bc"},
};

constexpr std::string_view kNormalizationNote =
    "rel_value = (V - V_rand) / (V* - V_rand) per holdout context, clipped to [0,1] and averaged; "
    "V_rand is the uniformly random policy. Contexts with V* = V_rand are skipped.";

bool offline_only(Learner l) {
  return l == Learner::kALLarge || l == Learner::kMWAL || l == Learner::kBC;
}

template <class T>
T get(const io::Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  if constexpr (std::is_unsigned_v<T>) {
    if (j.at(key).is_number_integer() && !j.at(key).is_number_unsigned()) {
      throw InvalidArgument(std::string("config field ") + key + " must be non-negative");
    }
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config field ") + key + ": " + e.what());
  }
}

void reject_unknown(const io::Json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidArgument(std::string("unknown ") + where + " field: " + key);
    }
  }
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Training-time stopwatch that excludes evaluation.
struct Stopwatch {
  bool enabled;
  Clock::time_point start = Clock::now();
  double excluded = 0.0;

  double elapsed() const { return enabled ? ms_since(start) - excluded : 0.0; }
  template <class Fn>
  auto exclude(Fn&& fn) {
    const auto t0 = Clock::now();
    auto out = fn();
    excluded += ms_since(t0);
    return out;
  }
};

MetricsRow make_row(std::size_t step, std::uint64_t seed, std::size_t n_demos, const EvalResult& r,
                    double wall_ms) {
  return MetricsRow{step, seed, n_demos, r.loss, r.rel_value, r.accuracy, wall_ms};
}

struct SeedContext {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  Environment env;
  Expert expert;
  Holdout holdout;
  SamplingScheme scheme;
  Rng context_rng;
  Rng demo_rng;
  PlannerConfig planner;

  SeedContext(const ExperimentConfig& c, std::uint64_t s, Environment e)
      : cfg(c),
        seed(s),
        env(std::move(e)),
        expert(env.cmdp, env.w_star, PlannerConfig{env.planner_tol}),
        holdout(Holdout::sample(expert, c.holdout > 0 ? c.holdout : env.holdout_size, c.holdout_seed)),
        context_rng(derive_seed(s, 1)),
        demo_rng(derive_seed(s, 2)),
        planner{env.planner_tol} {
    scheme.kind = cfg.scheme;
    scheme.horizon = cfg.horizon.value_or(40);
  }

  Context next_context() { return sample_context(context_rng, env.cmdp.d()); }
  Demonstration next_demo() { return expert.demonstrate(next_context(), scheme, demo_rng); }
  /// Trajectory demonstration even when the configured scheme is exact (for BC).
  Demonstration trajectory_demo(const Context& c) {
    SamplingScheme s = scheme;
    if (s.kind == DemoScheme::kExact) s.kind = DemoScheme::kFixedHorizon;
    return expert.demonstrate(c, s, demo_rng);
  }
  std::vector<Demonstration> train_set() {
    std::vector<Demonstration> demos;
    for (std::size_t i = 0; i < cfg.train_contexts; ++i) demos.push_back(next_demo());
    return demos;
  }
};

std::vector<MetricsRow> run_mda_seed(SeedContext& sc) {
  const auto& cfg = sc.cfg;
  const auto& cmdp = sc.env.cmdp;
  const Geometry g = cfg.learner == Learner::kPSGD ? Geometry::kEuclideanBall : Geometry::kSimplex;
  const bool offline = cfg.train_contexts > 0;
  std::optional<LossEvaluator> train;
  if (offline) train.emplace(cmdp, sc.train_set(), sc.planner, kernels::Backend::kSerial);
  Rng batch_rng(derive_seed(sc.seed, 3));
  GradientOracle oracle = [&](std::size_t, const Matrix& W) {
    if (offline) {
      std::uniform_int_distribution<std::size_t> pick(0, train->size() - 1);
      std::vector<std::size_t> idx(cfg.batch_size);
      for (auto& i : idx) i = pick(batch_rng);
      return train->loss_and_subgradient(W, idx);
    }
    std::vector<Demonstration> batch;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(sc.next_demo());
    return LossEvaluator(cmdp, std::move(batch), sc.planner, kernels::Backend::kSerial).loss_and_subgradient(W);
  };
  std::vector<MetricsRow> rows;
  Stopwatch clock{cfg.timing};
  Checkpoint cp = [&](std::size_t step, const Matrix& W) {
    const auto r = clock.exclude([&] { return sc.holdout.evaluate(W); });
    const std::size_t n = offline ? cfg.train_contexts : step * cfg.batch_size;
    rows.push_back(make_row(step, sc.seed, n, r, clock.elapsed()));
    return CheckpointMetrics{r.loss, r.rel_value, r.accuracy};
  };
  MDAConfig mc;
  mc.geometry = g;
  mc.T = cfg.T;
  mc.eval_every = cfg.eval_every;
  run_mda(cmdp.d(), cmdp.k(), cmdp.gamma(), oracle, mc, cp);
  return rows;
}

std::vector<MetricsRow> run_es_seed(SeedContext& sc) {
  const auto& cfg = sc.cfg;
  const auto& cmdp = sc.env.cmdp;
  ESTrainConfig ec;
  ec.geometry = Geometry::kEuclideanBall;
  ec.es = cfg.es;
  ec.es.rng_seed = derive_seed(sc.seed, 4);
  ec.normalize_step = cfg.es_normalize_step;
  ec.accept_if_decrease = cfg.es_accept_if_decrease;
  Rng rng(ec.es.rng_seed);
  Matrix W = Matrix::Zero(cmdp.d(), cmdp.k());

  const bool offline = cfg.train_contexts > 0;
  std::optional<LossEvaluator> train;
  if (offline) train.emplace(cmdp, sc.train_set(), sc.planner, kernels::Backend::kSerial);
  Matrix best = W;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<MetricsRow> rows;
  Stopwatch clock{cfg.timing};
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    std::optional<LossEvaluator> online;
    LossEvaluator* ev = nullptr;
    if (offline) {
      ev = &*train;
    } else {
      online.emplace(cmdp, std::vector<Demonstration>{sc.next_demo()}, sc.planner, kernels::Backend::kSerial);
      ev = &*online;
    }
    ev->set_policy_cache(W);
    const LossFunction loss = [ev](const Matrix& X) { return ev->value(X); };
    const double current = loss(W);
    const double alpha = cfg.es_alpha * std::pow(cfg.es_decay, static_cast<double>(t));
    auto step = es_step(loss, W, current, alpha, ec, rng);
    W = std::move(step.W);
    if (offline && step.loss < best_loss) {
      best_loss = step.loss;
      best = W;
    }
    if (cfg.eval_every > 0 && (t % cfg.eval_every == 0 || t == cfg.T)) {
      const Matrix& out = offline ? best : W;
      const auto r = clock.exclude([&] { return sc.holdout.evaluate(out); });
      rows.push_back(make_row(t, sc.seed, offline ? cfg.train_contexts : t, r, clock.elapsed()));
    }
  }
  return rows;
}

std::vector<MetricsRow> rows_from_trace(SeedContext& sc, const EllipsoidTrace& trace,
                                        const std::vector<std::pair<EvalResult, double>>& evals) {
  std::vector<MetricsRow> rows;
  std::size_t j = 0;
  for (const auto& r : trace.rows) {
    if (!r.holdout_rel_value) continue;
    if (j >= evals.size()) break;
    rows.push_back(make_row(r.round, sc.seed, r.suboptimal_count, evals[j].first, evals[j].second));
    ++j;
  }
  return rows;
}

std::vector<MetricsRow> run_ellipsoid_seed(SeedContext& sc) {
  const auto& cfg = sc.cfg;
  std::vector<std::pair<EvalResult, double>> evals;
  Stopwatch clock{cfg.timing};
  HoldoutEvaluator hold = [&](const Matrix& W) {
    const auto r = clock.exclude([&] { return sc.holdout.evaluate(W); });
    evals.emplace_back(r, clock.elapsed());
    return r.rel_value;
  };
  ContextStream contexts = [&](std::size_t) { return sc.next_context(); };
  if (cfg.learner == Learner::kEllipsoid) {
    EllipsoidConfig ec;
    ec.eps = cfg.eps;
    ec.max_rounds = cfg.T;
    ec.planner = sc.planner;
    ec.eval_every = cfg.eval_every;
    ec.record_every_round = false;
    return rows_from_trace(sc, run_ellipsoid(sc.expert, contexts, ec, hold), evals);
  }
  auto bc = BatchConfig::theory(sc.env.cmdp.d(), sc.env.cmdp.k(), sc.env.cmdp.gamma(), cfg.eps, cfg.delta);
  bc.max_rounds = cfg.T;
  bc.seed = derive_seed(sc.seed, 5);
  bc.planner = sc.planner;
  const RewardMapping w_star{sc.env.w_star, Geometry::kLinfBox};
  return rows_from_trace(sc, run_batch_ellipsoid(sc.env.cmdp, w_star, contexts, bc, hold), evals);
}

/// Holdout over the training contexts, for learners that cannot act on unseen ones.
EvalResult evaluate_mixture(const Holdout& on_train, const MixedPolicy& mix, std::size_t base_states) {
  EvalResult out;
  out.loss = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [pi, weight] : mix.components) {
    const auto r = on_train.evaluate([&](std::size_t i, const Context&) {
      DeterministicPolicy slice;
      const auto first = pi.actions.begin() + static_cast<std::ptrdiff_t>(i * base_states);
      slice.actions.assign(first, first + static_cast<std::ptrdiff_t>(base_states));
      return slice;
    });
    out.rel_value += weight * r.rel_value;
    out.accuracy += weight * r.accuracy;
    out.accuracy_uniform += weight * r.accuracy_uniform;
    out.skipped = r.skipped;
  }
  return out;
}

std::vector<MetricsRow> run_large_seed(SeedContext& sc) {
  const auto& cfg = sc.cfg;
  std::vector<Context> contexts;
  for (std::size_t i = 0; i < cfg.train_contexts; ++i) contexts.push_back(sc.next_context());
  Stopwatch clock{cfg.timing};
  const LargeMDP large = build_large_mdp(sc.env.cmdp, contexts);
  std::vector<DeterministicPolicy> expert_policies;
  for (const auto& c : contexts) expert_policies.push_back(sc.expert.solve(c)->plan.policy);
  const Vector mu_e = stacked_feature_expectations(large, expert_policies);
  const Holdout on_train(sc.expert, contexts);
  std::vector<MetricsRow> rows;
  const std::size_t every = cfg.eval_every > 0 ? cfg.eval_every : cfg.T;
  for (std::size_t t = every;; t = std::min(t + every, cfg.T)) {
    const auto t0 = Clock::now();
    const MixedPolicy mix = cfg.learner == Learner::kALLarge
                                ? al_projection(large.mdp, mu_e, t, 1e-6, sc.planner).policy
                                : mwal(large.mdp, mu_e, t, sc.planner).policy;
    const double wall = cfg.timing ? ms_since(t0) : 0.0;
    const auto r = evaluate_mixture(on_train, mix, large.base_states);
    rows.push_back(make_row(t, sc.seed, cfg.train_contexts, r, wall));
    if (t >= cfg.T) break;
  }
  (void)clock;
  return rows;
}

std::vector<MetricsRow> run_bc_seed(SeedContext& sc) {
  const auto& cfg = sc.cfg;
  const Matrix& phi = sc.env.cmdp.features();
  std::vector<BCSample> data;
  for (std::size_t i = 0; i < cfg.train_contexts; ++i) {
    const Context c = sc.next_context();
    const auto demo = sc.trajectory_demo(c);
    for (std::size_t t = 0; t < demo.trajectory.actions.size(); ++t) {
      data.push_back({c, demo.trajectory.states[t], demo.trajectory.actions[t]});
    }
  }
  BCConfig bc = cfg.bc;
  bc.epochs = cfg.T;
  bc.seed = derive_seed(sc.seed, 6);
  const auto t0 = Clock::now();
  const BCModel model = bc_train(data, phi, sc.env.cmdp.n_actions(), bc);
  const double wall = cfg.timing ? ms_since(t0) : 0.0;
  const auto r = sc.holdout.evaluate([&](std::size_t, const Context& c) { return bc_policy(model, phi, c); });
  return {make_row(cfg.T, sc.seed, cfg.train_contexts, r, wall)};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::string& column) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') throw InvalidArgument("bad value '" + cell + "' in column " + column);
  return v;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::ptrdiff_t find(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : it - columns.begin();
  }
};

Table read_table(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) return t;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split_csv(line);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != t.columns.size()) throw InvalidArgument("CSV row has " + std::to_string(cells.size()) +
                                                                " cells, header has " + std::to_string(t.columns.size()));
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row.push_back(parse_cell(cells[i], t.columns[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::string_view to_string(Learner l) {
  for (const auto& [v, name] : kLearners) {
    if (v == l) return name;
  }
  return "?";
}

Learner parse_learner(std::string_view name) {
  for (const auto& [v, n] : kLearners) {
    if (n == name) return v;
  }
  throw InvalidArgument("unknown learner: " + std::string(name));
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InvalidArgument("seeds must not be empty");
  if (T == 0) throw InvalidArgument("T must be at least 1");
  if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (horizon && *horizon == 0) throw InvalidArgument("horizon must be at least 1");
  if (offline_only(learner) && train_contexts == 0) {
    throw InvalidArgument(std::string(to_string(learner)) + " needs train_contexts > 0");
  }
  if ((learner == Learner::kEllipsoid || learner == Learner::kBatchEllipsoid) && train_contexts > 0) {
    throw InvalidArgument("ellipsoid learners are online only");
  }
  if (!(es_alpha > 0.0) || !(es_decay > 0.0)) throw InvalidArgument("ES step settings must be positive");
  es.validate();
  (void)make_preset(env);
}

io::Json config_to_json(const ExperimentConfig& cfg) {
  io::Json j;
  j["env"] = cfg.env;
  j["learner"] = std::string(to_string(cfg.learner));
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["horizon"] = cfg.horizon.value_or(40);
  j["T"] = cfg.T;
  j["batch_size"] = cfg.batch_size;
  j["seeds"] = cfg.seeds;
  j["holdout"] = cfg.holdout;
  j["holdout_seed"] = cfg.holdout_seed;
  j["eval_every"] = cfg.eval_every;
  j["output"] = cfg.output.string();
  j["train_contexts"] = cfg.train_contexts;
  j["eps"] = cfg.eps;
  j["delta"] = cfg.delta;
  j["es"] = {{"m", cfg.es.m},
             {"rho", cfg.es.rho},
             {"nu", cfg.es.nu},
             {"centered", cfg.es.centered},
             {"alpha", cfg.es_alpha},
             {"decay", cfg.es_decay},
             {"normalize_step", cfg.es_normalize_step},
             {"accept_if_decrease", cfg.es_accept_if_decrease}};
  j["bc"] = {{"feature_map", std::string(to_string(cfg.bc.feature_map))},
             {"batch_size", cfg.bc.batch_size},
             {"learning_rate", cfg.bc.learning_rate},
             {"decay", cfg.bc.decay},
             {"l2", cfg.bc.l2}};
  j["timing"] = cfg.timing;
  return j;
}

ExperimentConfig config_from_json(const io::Json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  reject_unknown(j,
                 {"env", "learner", "scheme", "horizon", "T", "batch_size", "seeds", "holdout", "holdout_seed",
                  "eval_every", "output", "train_contexts", "eps", "delta", "es", "bc", "timing"},
                 "config");
  ExperimentConfig cfg;
  cfg.env = get<std::string>(j, "env", cfg.env);
  cfg.learner = parse_learner(get<std::string>(j, "learner", std::string(to_string(cfg.learner))));
  cfg.scheme = parse_demo_scheme(get<std::string>(j, "scheme", std::string(to_string(cfg.scheme))));
  if (j.contains("horizon")) cfg.horizon = get<std::size_t>(j, "horizon", 40);
  cfg.T = get<std::size_t>(j, "T", cfg.T);
  cfg.batch_size = get<std::size_t>(j, "batch_size", cfg.batch_size);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    cfg.seeds = s.is_array() ? get<std::vector<std::uint64_t>>(j, "seeds", {})
                             : std::vector<std::uint64_t>{get<std::uint64_t>(j, "seeds", 0)};
  }
  cfg.holdout = get<std::size_t>(j, "holdout", cfg.holdout);
  cfg.holdout_seed = get<std::uint64_t>(j, "holdout_seed", cfg.holdout_seed);
  cfg.eval_every = get<std::size_t>(j, "eval_every", cfg.eval_every);
  cfg.output = get<std::string>(j, "output", cfg.output.string());
  cfg.train_contexts = get<std::size_t>(j, "train_contexts", cfg.train_contexts);
  cfg.eps = get<double>(j, "eps", cfg.eps);
  cfg.delta = get<double>(j, "delta", cfg.delta);
  if (j.contains("es")) {
    const auto& e = j.at("es");
    reject_unknown(e, {"m", "rho", "nu", "centered", "alpha", "decay", "normalize_step", "accept_if_decrease"}, "es");
    cfg.es.m = get<std::size_t>(e, "m", cfg.es.m);
    cfg.es.rho = get<double>(e, "rho", cfg.es.rho);
    cfg.es.nu = get<double>(e, "nu", cfg.es.nu);
    cfg.es.centered = get<bool>(e, "centered", cfg.es.centered);
    cfg.es_alpha = get<double>(e, "alpha", cfg.es_alpha);
    cfg.es_decay = get<double>(e, "decay", cfg.es_decay);
    cfg.es_normalize_step = get<bool>(e, "normalize_step", cfg.es_normalize_step);
    cfg.es_accept_if_decrease = get<bool>(e, "accept_if_decrease", cfg.es_accept_if_decrease);
  }
  if (j.contains("bc")) {
    const auto& b = j.at("bc");
    reject_unknown(b, {"feature_map", "batch_size", "learning_rate", "decay", "l2"}, "bc");
    cfg.bc.feature_map = parse_bc_feature_map(get<std::string>(b, "feature_map", "concat"));
    cfg.bc.batch_size = get<std::size_t>(b, "batch_size", cfg.bc.batch_size);
    cfg.bc.learning_rate = get<double>(b, "learning_rate", cfg.bc.learning_rate);
    cfg.bc.decay = get<double>(b, "decay", cfg.bc.decay);
    cfg.bc.l2 = get<double>(b, "l2", cfg.bc.l2);
  }
  cfg.timing = get<bool>(j, "timing", cfg.timing);
  return cfg;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  io::Json j;
  try {
    j = io::read_json(path);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cannot parse config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  const char* s = std::getenv("COIRL_SEED");
  if (s == nullptr || *s == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw InvalidArgument(std::string("COIRL_SEED is not an integer: ") + s);
  cfg.seeds = {static_cast<std::uint64_t>(v)};
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.seed << ',' << r.n_demos << ',' << fmt(r.loss) << ',' << fmt(r.rel_value) << ','
       << fmt(r.accuracy) << ',' << fmt(r.wall_ms) << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  const Table t = read_table(is);
  std::vector<MetricsRow> out;
  if (t.columns.empty()) return out;
  std::vector<std::ptrdiff_t> idx;
  std::istringstream header{std::string(kMetricsHeader)};
  std::string col;
  while (std::getline(header, col, ',')) {
    const auto i = t.find(col);
    if (i < 0) throw InvalidArgument("metrics CSV is missing column " + col);
    idx.push_back(i);
  }
  for (const auto& row : t.rows) {
    MetricsRow r;
    r.step = static_cast<std::size_t>(row[static_cast<std::size_t>(idx[0])]);
    r.seed = static_cast<std::uint64_t>(row[static_cast<std::size_t>(idx[1])]);
    r.n_demos = static_cast<std::size_t>(row[static_cast<std::size_t>(idx[2])]);
    r.loss = row[static_cast<std::size_t>(idx[3])];
    r.rel_value = row[static_cast<std::size_t>(idx[4])];
    r.accuracy = row[static_cast<std::size_t>(idx[5])];
    r.wall_ms = row[static_cast<std::size_t>(idx[6])];
    out.push_back(r);
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRow>>& per_seed) {
  std::map<std::size_t, std::vector<const MetricsRow*>> by_step;
  for (const auto& rows : per_seed) {
    for (const auto& r : rows) by_step[r.step].push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& [step, rows] : by_step) {
    std::vector<double> loss, rel, acc, wall;
    for (const auto* r : rows) {
      loss.push_back(r->loss);
      rel.push_back(r->rel_value);
      acc.push_back(r->accuracy);
      wall.push_back(r->wall_ms);
    }
    AggregateRow a;
    a.step = step;
    a.n_demos = rows.front()->n_demos;
    a.seeds = rows.size();
    a.loss_mean = mean_of(loss);
    a.loss_std = std_of(loss);
    a.rel_value_mean = mean_of(rel);
    a.rel_value_std = std_of(rel);
    a.accuracy_mean = mean_of(acc);
    a.accuracy_std = std_of(acc);
    a.wall_ms_mean = mean_of(wall);
    a.wall_ms_std = std_of(wall);
    out.push_back(a);
  }
  return out;
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    os << a.step << ',' << a.n_demos << ',' << a.seeds << ',' << fmt(a.loss_mean) << ',' << fmt(a.loss_std) << ','
       << fmt(a.rel_value_mean) << ',' << fmt(a.rel_value_std) << ',' << fmt(a.accuracy_mean) << ','
       << fmt(a.accuracy_std) << ',' << fmt(a.wall_ms_mean) << ',' << fmt(a.wall_ms_std) << '\n';
  }
}

std::vector<MetricsRow> run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedContext sc(cfg, seed, make_preset(cfg.env));
  switch (cfg.learner) {
    case Learner::kPSGD:
    case Learner::kEW:
      return run_mda_seed(sc);
    case Learner::kES:
      return run_es_seed(sc);
    case Learner::kEllipsoid:
    case Learner::kBatchEllipsoid:
      return run_ellipsoid_seed(sc);
    case Learner::kALLarge:
    case Learner::kMWAL:
      return run_large_seed(sc);
    case Learner::kBC:
      return run_bc_seed(sc);
  }
  throw InvalidArgument("unhandled learner");
}

namespace {

io::Json resolved_hyperparameters(const ExperimentConfig& cfg) {
  const Environment env = make_preset(cfg.env);
  const std::size_t d = env.cmdp.d(), k = env.cmdp.k();
  const double gamma = env.cmdp.gamma();
  io::Json r;
  r["d"] = d;
  r["k"] = k;
  r["n_states"] = env.cmdp.n_states();
  r["n_actions"] = env.cmdp.n_actions();
  r["gamma"] = gamma;
  r["planner_tol"] = env.planner_tol;
  r["holdout_size"] = cfg.holdout > 0 ? cfg.holdout : env.holdout_size;
  r["horizon"] = cfg.horizon.value_or(40);
  switch (cfg.learner) {
    case Learner::kPSGD:
    case Learner::kEW: {
      const auto g = theory_constants(d, k, gamma, cfg.learner == Learner::kPSGD ? Geometry::kEuclideanBall
                                                                                  : Geometry::kSimplex);
      r["geometry"] = std::string(to_string(g.geometry));
      r["sigma"] = g.sigma;
      r["D"] = g.D;
      r["L"] = g.L;
      r["alpha_1"] = g.alpha(1);
      r["bound_T"] = g.mda_bound(cfg.T);
      break;
    }
    case Learner::kES:
      r["es_step"] = "alpha * decay^t";
      r["es_m"] = cfg.es.m;
      r["es_nu"] = cfg.es.nu;
      break;
    case Learner::kEllipsoid:
      r["cut_bound"] = ellipsoid_cut_bound(d, k, gamma, cfg.eps);
      break;
    case Learner::kBatchEllipsoid: {
      const auto b = BatchConfig::theory(d, k, gamma, cfg.eps, cfg.delta);
      r["H"] = b.H;
      r["n"] = b.n;
      r["round_bound"] = batch_round_bound(b.n, d, k, gamma, cfg.eps);
      r["near_optimal_radius"] = near_optimal_radius(cfg.eps, gamma, k);
      break;
    }
    case Learner::kALLarge:
      r["al_tol"] = 1e-6;
      r["evaluated_on"] = "training contexts";
      break;
    case Learner::kMWAL:
      r["mwal_k_prime"] = d * k;
      r["mwal_bound_T"] = mwal_bound(d * k, gamma, cfg.T);
      r["evaluated_on"] = "training contexts";
      break;
    case Learner::kBC:
      r["bc_epochs"] = cfg.T;
      break;
  }
  return r;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write) {
  cfg.validate();
  ExperimentResult result;
  result.seeds = kernels::map_omp(cfg.seeds.size(), [&](std::size_t i) {
    SeedResult s;
    s.seed = cfg.seeds[i];
    try {
      s.rows = run_seed(cfg, s.seed);
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  });
  std::vector<std::vector<MetricsRow>> ok;
  io::Json seeds = io::Json::array();
  for (const auto& s : result.seeds) {
    io::Json entry{{"seed", s.seed}, {"status", s.error ? "failed" : "ok"}, {"rows", s.rows.size()}};
    if (s.error) {
      entry["error"] = *s.error;
      std::cerr << "warning: seed " << s.seed << " failed: " << *s.error << '\n';
    } else {
      ok.push_back(s.rows);
    }
    seeds.push_back(std::move(entry));
  }
  result.aggregate = aggregate(ok);
  result.manifest = io::Json{{"config", config_to_json(cfg)},
                             {"config_hash", config_hash(cfg)},
                             {"version", COIRL_VERSION},
                             {"resolved", resolved_hyperparameters(cfg)},
                             {"normalization", std::string(kNormalizationNote)},
                             {"seeds", std::move(seeds)}};
  if (write) {
    std::filesystem::create_directories(cfg.output);
    for (const auto& s : result.seeds) {
      if (s.error) continue;
      std::ofstream os(cfg.output / ("seed_" + std::to_string(s.seed) + ".csv"), std::ios::binary);
      write_metrics_csv(os, s.rows);
    }
    std::ofstream agg(cfg.output / "aggregate.csv", std::ios::binary);
    write_aggregate_csv(agg, result.aggregate);
    io::write_json(cfg.output / "manifest.json", result.manifest);
  }
  return result;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

std::vector<RuntimeRow> runtime_sweep(std::string_view env_name, const std::vector<std::size_t>& sizes,
                                      std::size_t iterations, std::uint64_t seed) {
  if (sizes.empty() || iterations == 0) throw InvalidArgument("runtime sweep needs sizes and iterations");
  const Environment env = make_preset(env_name);
  const PlannerConfig planner{env.planner_tol};
  const Expert expert(env.cmdp, env.w_star, planner);
  const auto consts = theory_constants(env.cmdp.d(), env.cmdp.k(), env.cmdp.gamma(), Geometry::kEuclideanBall);
  std::vector<RuntimeRow> out;
  for (std::size_t n : sizes) {
    if (n == 0) throw InvalidArgument("context-set size must be positive");
    Rng rng(derive_seed(seed, n));
    std::vector<Context> contexts;
    std::vector<Demonstration> demos;
    std::vector<DeterministicPolicy> policies;
    for (std::size_t i = 0; i < n; ++i) {
      contexts.push_back(sample_context(rng, env.cmdp.d()));
      demos.push_back(expert.exact_demonstration(contexts.back()));
      policies.push_back(expert.solve(contexts.back())->plan.policy);
    }
    const LargeMDP large = build_large_mdp(env.cmdp, contexts);
    const Vector mu_e = stacked_feature_expectations(large, policies);
    const auto al = al_projection(large.mdp, mu_e, iterations, 0.0, planner);

    const LossEvaluator ev(env.cmdp, demos, planner, kernels::Backend::kSerial);
    Matrix W(env.cmdp.d(), env.cmdp.k());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < W.size(); ++i) W(i) = normal(rng);
    W /= W.norm();
    std::vector<double> coirl;
    for (std::size_t t = 1; t <= iterations; ++t) {
      const auto t0 = Clock::now();
      const auto lg = ev.term_and_subgradient(W, (t - 1) % n);
      if (lg.gradient.norm() > 0.0) W = mda_step(W, lg.gradient, consts.alpha(t), Geometry::kEuclideanBall);
      coirl.push_back(ms_since(t0));
    }
    out.push_back({n, median(al.iteration_ms), median(coirl), al.iterations});
  }
  return out;
}

void write_runtime_csv(std::ostream& os, const std::vector<RuntimeRow>& rows) {
  os << kRuntimeHeader << '\n';
  for (const auto& r : rows) {
    os << r.contexts << ',' << fmt(r.al_ms) << ',' << fmt(r.coirl_ms) << ',' << r.al_iterations << '\n';
  }
}

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y, lo, hi;
  bool band = false;
};

Series load_series(const std::filesystem::path& path, const PlotSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open " + path.string());
  const Table t = read_table(is);
  Series s;
  s.label = path.stem().string();
  if (t.columns.empty()) return s;
  const auto xi = t.find(spec.x);
  if (xi < 0) throw InvalidArgument(path.string() + ": missing column " + spec.x);
  if (t.find(spec.metric + "_mean") >= 0) {
    const auto mi = t.find(spec.metric + "_mean");
    const auto si = t.find(spec.metric + "_std");
    if (si < 0) throw InvalidArgument(path.string() + ": missing column " + spec.metric + "_std");
    for (const auto& row : t.rows) {
      const double m = row[static_cast<std::size_t>(mi)], sd = row[static_cast<std::size_t>(si)];
      if (!std::isfinite(m)) continue;
      s.x.push_back(row[static_cast<std::size_t>(xi)]);
      s.y.push_back(m);
      s.lo.push_back(m - sd);
      s.hi.push_back(m + sd);
    }
    s.band = true;
    return s;
  }
  std::istringstream header{std::string(kMetricsHeader)};
  std::string col;
  while (std::getline(header, col, ',')) {
    if (t.find(col) < 0) throw InvalidArgument(path.string() + ": missing column " + col);
  }
  const auto mi = t.find(spec.metric);
  if (mi < 0) throw InvalidArgument(path.string() + ": missing column " + spec.metric);
  const auto seed_i = static_cast<std::size_t>(t.find("seed"));
  std::set<double> seeds;
  std::map<double, std::vector<double>> by_x;
  for (const auto& row : t.rows) {
    seeds.insert(row[seed_i]);
    const double v = row[static_cast<std::size_t>(mi)];
    if (std::isfinite(v)) by_x[row[static_cast<std::size_t>(xi)]].push_back(v);
  }
  s.band = seeds.size() > 1;
  for (const auto& [x, ys] : by_x) {
    const double m = mean_of(ys), sd = std_of(ys);
    s.x.push_back(x);
    s.y.push_back(m);
    s.lo.push_back(m - sd);
    s.hi.push_back(m + sd);
  }
  return s;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string render_svg(const std::vector<std::filesystem::path>& csvs, const PlotSpec& spec) {
  if (spec.metric != "loss" && spec.metric != "rel_value" && spec.metric != "accuracy") {
    throw InvalidArgument("unknown plot metric: " + spec.metric);
  }
  if (spec.x != "step" && spec.x != "n_demos") throw InvalidArgument("unknown plot x axis: " + spec.x);
  std::vector<Series> series;
  for (const auto& p : csvs) series.push_back(load_series(p, spec));

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      any = true;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.band ? s.lo[i] : s.y[i]);
      y1 = std::max(y1, s.band ? s.hi[i] : s.y[i]);
    }
  }
  if (!any) {
    x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double W = spec.width, H = spec.height;
  const double left = 60, right = 20, top = 30, bottom = 45;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
     << (spec.title.empty() ? spec.metric : spec.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 15 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << std::setprecision(3) << std::defaultfloat << xv << std::fixed << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << left - 5 << "\" y=\"" << py(yv) + 3 << "\" text-anchor=\"end\" font-size=\"10\">"
       << std::setprecision(3) << std::defaultfloat << yv << std::fixed << std::setprecision(2) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << spec.x << "</text>\n";
  os << "<text x=\"14\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
     << top + ph / 2 << ")\">" << spec.metric << "</text>\n";
  if (!any) {
    std::cerr << "warning: no data to plot\n";
    os << "<text class=\"warning\" x=\"" << left + pw / 2 << "\" y=\"" << top + ph / 2
       << "\" text-anchor=\"middle\" font-size=\"12\" fill=\"gray\">warning: no data</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (s.x.empty()) continue;
    if (s.band) {
      os << "<path class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" d=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << (i == 0 ? 'M' : 'L') << px(s.x[i]) << ',' << py(s.hi[i]);
      for (std::size_t i = s.x.size(); i-- > 0;) os << 'L' << px(s.x[i]) << ',' << py(s.lo[i]);
      os << "Z\"/>\n";
    }
    os << "<path class=\"line\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i == 0 ? 'M' : 'L') << px(s.x[i]) << ',' << py(s.y[i]);
    os << "\"/>\n";
    os << "<text x=\"" << left + 8 << "\" y=\"" << top + 14 + 14 * static_cast<double>(k) << "\" font-size=\"11\" fill=\""
       << color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_plots(const std::vector<std::filesystem::path>& csvs, const PlotSpec& spec,
                const std::filesystem::path& out) {
  const std::string svg = render_svg(csvs, spec);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream os(out, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + out.string());
  os << svg;
}

}  // namespace coirl
