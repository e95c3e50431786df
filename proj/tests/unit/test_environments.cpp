#include <gtest/gtest.h>

#include "coirl/environments.hpp"
#include "coirl/error.hpp"
#include "coirl/planner.hpp"

using namespace coirl;

TEST(GridWorld, ShapeAndWrap) {
  const auto env = make_gridworld({3, 4, 0.9});
  EXPECT_EQ(env.cmdp.n_states(), 12u);
  EXPECT_EQ(env.cmdp.d(), 12u);
  EXPECT_EQ(env.cmdp.k(), 12u);
  EXPECT_TRUE(env.cmdp.context_independent());
  const auto& p = env.cmdp.base_kernels()[0];
  // (x = n-1, y = 1) moving right lands on (0, 1)
  EXPECT_EQ(p.prob(1 * 3 + 2, static_cast<std::size_t>(GridAction::kRight), 1 * 3 + 0), 1.0);
  EXPECT_EQ(p.prob(0, static_cast<std::size_t>(GridAction::kLeft), 2), 1.0);
  EXPECT_EQ(p.prob(0, static_cast<std::size_t>(GridAction::kUp), 9), 1.0);
  EXPECT_EQ(p.prob(9, static_cast<std::size_t>(GridAction::kDown), 0), 1.0);
}

TEST(GridWorld, VertexContextsGiveDifferentPolicies) {
  const auto env = make_gridworld({3, 4, 0.9});
  const auto a = value_iteration(instantiate(env.cmdp, Context(Vector::Unit(12, 0)), env.w_star)).policy;
  const auto b = value_iteration(instantiate(env.cmdp, Context(Vector::Unit(12, 7)), env.w_star)).policy;
  EXPECT_NE(a, b);
}

TEST(Driving, StateCountPresetsAndFeatures) {
  const auto env = make_driving({});
  EXPECT_EQ(env.cmdp.n_states(), 1531u);
  EXPECT_EQ(env.cmdp.n_actions(), 2u);
  EXPECT_TRUE(env.cmdp.context_independent());
  EXPECT_EQ(driving_w_star(DrivingPreset::kEllipsoid),
            (Matrix(3, 3) << -1, 0.75, 0.75, 0.5, -1, 1, 0.75, 1, -0.75).finished());
  EXPECT_EQ(driving_w_star(DrivingPreset::kOnline),
            (Matrix(3, 3) << 0.043, 0, 0.043, 0, 0.434, 0, 0.043, 0.434, 0).finished());
  for (std::size_t i = 1; i < 1531; ++i) {
    const auto s = driving::decode(i);
    EXPECT_EQ(driving::index(s), i);
    const auto phi = env.cmdp.features().row(static_cast<Eigen::Index>(i));
    EXPECT_EQ(phi[1], driving::collision(s) ? 0.0 : 0.5);
    EXPECT_EQ(phi[2], driving::on_road(s.x) ? 0.5 : 0.0);
  }
  Rng rng(1);
  const auto k1 = env.cmdp.kernel_for(sample_context(rng, 3));
  const auto k2 = env.cmdp.kernel_for(sample_context(rng, 3));
  EXPECT_TRUE(k1->approx_equal(*k2, 1e-15));
}

TEST(Driving, ContextsInduceDifferentBehaviour) {
  const auto env = make_driving({0.9, DrivingPreset::kEllipsoid});
  const auto speed_choice = [&](const Vector& c) {
    return value_iteration(instantiate(env.cmdp, Context(c), env.w_star)).policy;
  };
  EXPECT_NE(speed_choice(Vector::Unit(3, 0)), speed_choice(Vector::Unit(3, 1)));
  EXPECT_NE(speed_choice(Vector::Unit(3, 1)), speed_choice(Vector::Unit(3, 2)));
}

TEST(Synthetic, DeterministicAndValid) {
  SyntheticCMDPSpec spec;
  spec.seed = 17;
  const auto a = make_random_cmdp(spec);
  const auto b = make_random_cmdp(spec);
  EXPECT_EQ(a.w_star, b.w_star);
  EXPECT_EQ(a.cmdp.features(), b.cmdp.features());
  for (std::size_t i = 0; i < spec.d; ++i)
    EXPECT_TRUE(a.cmdp.base_kernels()[i].approx_equal(b.cmdp.base_kernels()[i], 0.0));
  EXPECT_FALSE(a.cmdp.context_independent());
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto p = a.cmdp.kernel_for(sample_context(rng, spec.d));
    for (std::size_t s = 0; s < spec.n_states; ++s)
      for (std::size_t act = 0; act < spec.n_actions; ++act) {
        double z = 0.0;
        for (const auto& tr : p->row(s, act)) z += tr.prob;
        EXPECT_NEAR(z, 1.0, 1e-9);
      }
  }
  spec.d = 1;
  EXPECT_THROW(make_random_cmdp(spec), InvalidArgument);
}

TEST(SampleContext, MomentsAndNormalization) {
  Rng rng(5);
  EXPECT_EQ(sample_context(rng, 1).vector()[0], 1.0);
  const int n = 100000;
  Vector sum = Vector::Zero(4), sq = Vector::Zero(4);
  for (int i = 0; i < n; ++i) {
    const Vector c = sample_context(rng, 4).vector();
    EXPECT_NEAR(c.sum(), 1.0, 1e-12);
    sum += c;
    sq += c.cwiseProduct(c);
  }
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt((sq[j] / n - mean * mean) / n);
    EXPECT_NEAR(mean, 0.25, 3 * se);
  }
}

TEST(Presets, Parse) {
  EXPECT_EQ(make_preset("grid:2x3").cmdp.n_states(), 6u);
  EXPECT_EQ(make_preset("synth:10,3,2,4,1").cmdp.k(), 4u);
  EXPECT_THROW(make_preset("grid:3"), InvalidArgument);
  EXPECT_THROW(make_preset("nope"), InvalidArgument);
}
