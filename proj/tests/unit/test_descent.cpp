#include <gtest/gtest.h>

#include <cmath>

#include "coirl/descent.hpp"
#include "coirl/ellipsoid.hpp"
#include "coirl/environments.hpp"
#include "coirl/error.hpp"
#include "coirl/evaluation.hpp"

using namespace coirl;

TEST(TheoryConstants, BallExample) {
  const auto c = theory_constants(3, 3, 0.9, Geometry::kEuclideanBall);
  EXPECT_DOUBLE_EQ(c.sigma, 1.0);
  EXPECT_DOUBLE_EQ(c.D, 1.0);
  EXPECT_NEAR(c.L, 60.0, 1e-12);
  EXPECT_NEAR(c.alpha(1), 0.023570, 1e-6);
  EXPECT_NEAR(c.alpha(1), 0.1 * std::sqrt(1.0 / 18.0), 1e-15);
  EXPECT_NEAR(c.alpha(4), c.alpha(1) / 2.0, 1e-15);
}

TEST(TheoryConstants, SimplexExample) {
  const auto c = theory_constants(3, 3, 0.9, Geometry::kSimplex);
  EXPECT_NEAR(c.L, 20.0, 1e-12);
  EXPECT_NEAR(c.D, std::sqrt(std::log(9.0)), 1e-15);
  EXPECT_NEAR(c.alpha(1), 0.104815, 1e-6);
}

TEST(TheoryConstants, BoundsAndEsFormulas) {
  const auto c = theory_constants(2, 2, 0.5, Geometry::kEuclideanBall);
  EXPECT_NEAR(c.mda_bound(8), c.D * c.L * std::sqrt(2.0 / 8.0), 1e-12);
  EXPECT_NEAR(c.es_alpha(15), c.D / (8.0 * 4.0 * c.L), 1e-15);
  EXPECT_NEAR(c.es_iterations(0.5), 4.0 * 64.0 * c.L * c.L / 0.25, 1e-9);
}

TEST(TheoryConstants, Errors) {
  EXPECT_THROW(theory_constants(1, 1, 0.9, Geometry::kSimplex), InvalidArgument);
  EXPECT_THROW(theory_constants(2, 2, 0.9, Geometry::kLinfBox), InvalidArgument);
  EXPECT_THROW(theory_constants(2, 2, 1.0, Geometry::kEuclideanBall), InvalidArgument);
}

TEST(TheoryConstants, DivergeAsGammaApproachesOne) {
  const auto a = theory_constants(2, 2, 0.99, Geometry::kEuclideanBall);
  const auto b = theory_constants(2, 2, 0.999, Geometry::kEuclideanBall);
  EXPECT_NEAR(b.L / a.L, 10.0, 1e-9);
}

TEST(MdaStep, ZeroGradientKeepsIterate) {
  Matrix W(2, 2);
  W << 0.5, 0.5, 0.5, 0.5;
  EXPECT_LE((mda_step(W, Matrix::Zero(2, 2), 0.3, Geometry::kEuclideanBall) - W).norm(), 1e-15);
  const Matrix U = Matrix::Constant(2, 2, 0.25);
  EXPECT_LE((mda_step(U, Matrix::Zero(2, 2), 0.3, Geometry::kSimplex) - U).norm(), 1e-15);
}

TEST(MdaStep, SimplexHandExample) {
  const Matrix U = Matrix::Constant(2, 2, 0.25);
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 1.0;
  const Matrix next = mda_step(U, g, 1.0, Geometry::kSimplex);
  const double z = std::exp(-1.0) + 3.0;
  EXPECT_NEAR(next(0, 0), std::exp(-1.0) / z, 1e-15);
  EXPECT_NEAR(next(0, 1), 1.0 / z, 1e-15);
  EXPECT_NEAR(next(1, 0), 1.0 / z, 1e-15);
  EXPECT_NEAR(next(1, 1), 1.0 / z, 1e-15);
}

TEST(MdaStep, SimplexShiftInvariance) {
  Rng rng(1);
  const Matrix W = sample_in_geometry(rng, 3, 2, Geometry::kSimplex);
  const Matrix g = Matrix::Random(3, 2);
  const Matrix a = mda_step(W, g, 0.7, Geometry::kSimplex);
  const Matrix b = mda_step(W, (g.array() + 5.0).matrix(), 0.7, Geometry::kSimplex);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MdaStep, SimplexSurvivesHugeSteps) {
  const Matrix U = Matrix::Constant(2, 2, 0.25);
  Matrix g = Matrix::Zero(2, 2);
  g(1, 1) = -1e6;
  const Matrix next = mda_step(U, g, 10.0, Geometry::kSimplex);
  EXPECT_TRUE(next.allFinite());
  EXPECT_NEAR(next(1, 1), 1.0, 1e-12);
}

TEST(MdaStep, BallAlwaysNormalizes) {
  Matrix W = Matrix::Zero(2, 2);
  W(0, 0) = 0.1;
  const Matrix next = mda_step(W, Matrix::Zero(2, 2), 1.0, Geometry::kEuclideanBall);
  EXPECT_NEAR(next.norm(), 1.0, 1e-15);
  EXPECT_NEAR(next(0, 0), 1.0, 1e-15);
}

TEST(MdaStep, BallZeroResultThrows) {
  const Matrix W = Matrix::Identity(2, 2) / std::sqrt(2.0);
  EXPECT_THROW(mda_step(W, W, 1.0, Geometry::kEuclideanBall), DegenerateStep);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(mda_step(W, bad, 1.0, Geometry::kEuclideanBall), DegenerateStep);
}

TEST(MdaStep, BoxClips) {
  const Matrix W = Matrix::Constant(1, 2, 0.9);
  Matrix g(1, 2);
  g << -1.0, 1.0;
  const Matrix next = mda_step(W, g, 1.0, Geometry::kLinfBox);
  EXPECT_DOUBLE_EQ(next(0, 0), 1.0);
  EXPECT_NEAR(next(0, 1), -0.1, 1e-15);
}

TEST(MdaStep, IteratesStayInGeometry) {
  Rng rng(2);
  for (Geometry geo : {Geometry::kEuclideanBall, Geometry::kSimplex}) {
    Matrix W = sample_in_geometry(rng, 3, 3, geo);
    if (geo == Geometry::kEuclideanBall) W /= W.norm();
    for (int t = 1; t <= 200; ++t) {
      W = mda_step(W, 10.0 * Matrix::Random(3, 3), 0.5 / std::sqrt(t), geo);
      if (geo == Geometry::kEuclideanBall) {
        EXPECT_NEAR(W.norm(), 1.0, 1e-9);
      } else {
        EXPECT_NEAR(W.sum(), 1.0, 1e-9);
        EXPECT_GE(W.minCoeff(), 0.0);
      }
    }
  }
}

TEST(RunMda, ZeroGradientsReturnStart) {
  MDAConfig cfg;
  cfg.T = 20;
  cfg.geometry = Geometry::kSimplex;
  Matrix w1(2, 2);
  w1 << 0.1, 0.2, 0.3, 0.4;
  cfg.w1 = w1;
  const auto trace = run_mda(2, 2, 0.9, [](std::size_t, const Matrix& W) {
    return LossAndGradient{0.0, Matrix::Zero(W.rows(), W.cols())};
  }, cfg);
  EXPECT_LE((trace.w_avg - w1).norm(), 1e-15);
  EXPECT_EQ(trace.rows.size(), 20u);
}

TEST(RunMda, TrueMappingStartHasZeroGradients) {
  auto env = make_gridworld({2, 2, 0.9});
  const Matrix w1 = env.w_star / env.w_star.norm();
  const Expert expert(env.cmdp, w1, PlannerConfig{1e-10});
  Rng rng(3);
  MDAConfig cfg;
  cfg.T = 30;
  cfg.w1 = w1;
  const auto trace = run_mda(env.cmdp, [&](std::size_t) {
    return expert.exact_demonstration(sample_context(rng, env.cmdp.d()));
  }, cfg, PlannerConfig{1e-10});
  EXPECT_LE((trace.w_avg - w1).norm(), 1e-12);
  for (const auto& r : trace.rows) EXPECT_LE(r.grad_norm, 1e-12);
}

TEST(RunMda, LearnsGridWorld) {
  auto env = make_gridworld({2, 2, 0.9});
  const Expert expert(env.cmdp, env.w_star, PlannerConfig{1e-8});
  const auto holdout = Holdout::sample(expert, 30, 77);
  auto train = [&](Geometry geo, std::size_t T) {
    Rng rng(4);
    MDAConfig cfg;
    cfg.geometry = geo;
    cfg.T = T;
    cfg.eval_every = 0;
    return run_mda(env.cmdp, [&](std::size_t) {
      return expert.exact_demonstration(sample_context(rng, env.cmdp.d()));
    }, cfg, PlannerConfig{1e-8}).w_avg;
  };
  EXPECT_LT(holdout.evaluate(train(Geometry::kEuclideanBall, 1000)).loss,
            holdout.evaluate(train(Geometry::kEuclideanBall, 100)).loss);
  EXPECT_GE(holdout.evaluate(train(Geometry::kSimplex, 300)).rel_value, 0.95);
}

TEST(TrainTrace, CsvHeader) {
  TrainTrace t;
  t.rows.push_back({1, 0.5, 2.0, 0.25, std::nullopt, std::nullopt});
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,alpha,grad_norm,loss,rel_value,accuracy");
}

TEST(RunEs, TrueMappingStartStaysBest) {
  auto env = make_gridworld({2, 2, 0.9});
  const Matrix w_star = env.w_star / env.w_star.norm();
  const Expert expert(env.cmdp, w_star, PlannerConfig{1e-10});
  Rng rng(5);
  std::vector<Demonstration> demos;
  for (int i = 0; i < 5; ++i) demos.push_back(expert.exact_demonstration(sample_context(rng, env.cmdp.d())));
  const LossEvaluator ev(env.cmdp, demos, PlannerConfig{1e-10});
  ESTrainConfig cfg;
  cfg.T = 10;
  cfg.es.m = 20;
  cfg.w1 = w_star;
  const auto trace = run_es([&](const Matrix& W) { return ev.value(W); }, env.cmdp.d(), env.cmdp.k(), 0.9, cfg);
  EXPECT_LE(trace.best_loss, 1e-10);
  EXPECT_LE((trace.w_best - w_star).norm(), 1e-12);
}

TEST(RunEs, OriginIsNeverBest) {
  ESTrainConfig cfg;
  cfg.T = 5;
  cfg.es.m = 10;
  cfg.schedule = [](std::size_t) { return 0.1; };
  const Matrix target = Matrix::Identity(2, 2) / std::sqrt(2.0);
  const auto trace = run_es([&](const Matrix& W) { return (W - target).norm(); }, 2, 2, 0.9, cfg);
  EXPECT_NEAR(trace.w_best.norm(), 1.0, 1e-12);
}

TEST(Monitored, PerfectRefitStopsDemonstrations) {
  auto env = make_gridworld({2, 2, 0.9});
  const Expert expert(env.cmdp, env.w_star, PlannerConfig{env.planner_tol});
  Rng rng(6);
  MonitoredConfig cfg;
  cfg.eps = 1e-3;
  cfg.max_rounds = 40;
  const auto trace = run_monitored(
      expert, [&](std::size_t) { return sample_context(rng, env.cmdp.d()); }, Matrix::Zero(4, 4),
      [&](LossEvaluator&, const Matrix&) { return env.w_star; }, cfg);
  EXPECT_LE(trace.demo_count, 1u);
  EXPECT_EQ(trace.rounds, 40u);
}

TEST(Monitored, PsgdAndEsRefitsImprove) {
  auto env = make_gridworld({2, 2, 0.9});
  const Expert expert(env.cmdp, env.w_star, PlannerConfig{env.planner_tol});
  const auto holdout = Holdout::sample(expert, 20, 8);
  ESTrainConfig es;
  es.T = 10;
  es.es.m = 40;
  es.normalize_step = true;
  es.schedule = [](std::size_t t) { return 0.1 * std::pow(0.95, static_cast<double>(t)); };
  for (const auto& refit : {make_psgd_refit({}), make_es_refit(es)}) {
    Rng rng(9);
    MonitoredConfig cfg;
    cfg.eps = 0.05;
    cfg.max_rounds = 60;
    const auto trace = run_monitored(
        expert, [&](std::size_t) { return sample_context(rng, env.cmdp.d()); }, Matrix::Zero(4, 4), refit, cfg,
        [&](const Matrix& W) { return holdout.evaluate(W).rel_value; });
    ASSERT_FALSE(trace.rows.empty());
    EXPECT_EQ(trace.rows.front().demos, 0u);
    EXPECT_EQ(trace.rows.size(), trace.demo_count + 1);
    EXPECT_GT(trace.rows.back().holdout_rel_value, trace.rows.front().holdout_rel_value);
  }
}

TEST(Monitored, RejectsBadInputs) {
  auto env = make_gridworld({2, 2, 0.9});
  const Expert expert(env.cmdp, env.w_star);
  Rng rng(1);
  auto ctx = [&](std::size_t) { return sample_context(rng, 4); };
  MonitoredConfig cfg;
  EXPECT_THROW(run_monitored(expert, ctx, Matrix::Zero(4, 4), {}, cfg), InvalidArgument);
  EXPECT_THROW(run_monitored(expert, ctx, Matrix::Zero(3, 4), make_psgd_refit({}), cfg), InvalidArgument);
  ESTrainConfig es;
  EXPECT_THROW(make_es_refit(es), InvalidArgument);
}
