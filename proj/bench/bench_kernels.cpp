// Serial vs OpenMP kernels: one Bellman sweep on a large random MDP and one loss pass over a
// demonstration batch. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "coirl/environments.hpp"
#include "coirl/expert.hpp"
#include "coirl/kernels.hpp"
#include "coirl/loss.hpp"

using namespace coirl;

namespace {

InstantiatedMDP large_mdp(std::size_t n_states) {
  SyntheticCMDPSpec spec;
  spec.n_states = n_states;
  spec.n_actions = 4;
  spec.branching = 8;
  spec.seed = 3;
  const auto env = make_random_cmdp(spec);
  return instantiate(env.cmdp, Context(Vector::Constant(5, 0.2)), env.w_star);
}

template <bool Parallel>
void BM_BellmanSweep(benchmark::State& state) {
  const auto m = large_mdp(static_cast<std::size_t>(state.range(0)));
  const Vector& reward = m.reward;
  Vector in = Vector::Zero(reward.size()), out(reward.size());
  for (auto _ : state) {
    const double delta = Parallel ? kernels::bellman_sweep_omp(*m.kernel, reward, m.gamma, in, out)
                                  : kernels::bellman_sweep_serial(*m.kernel, reward, m.gamma, in, out);
    benchmark::DoNotOptimize(delta);
    in.swap(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <kernels::Backend B>
void BM_LossBatch(benchmark::State& state) {
  const auto env = make_gridworld({4, 4, 0.9});
  const Expert expert(env.cmdp, env.w_star, PlannerConfig{1e-6});
  Rng rng(1);
  std::vector<Demonstration> demos;
  for (std::int64_t i = 0; i < state.range(0); ++i)
    demos.push_back(expert.exact_demonstration(sample_context(rng, env.cmdp.d())));
  const LossEvaluator ev(env.cmdp, demos, PlannerConfig{1e-6}, B);
  const Matrix W = sample_in_geometry(rng, env.cmdp.d(), env.cmdp.k(), Geometry::kLinfBox);
  for (auto _ : state) benchmark::DoNotOptimize(ev.loss_and_subgradient(W).loss);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BellmanSweep<false>)->Name("bellman_sweep/serial")->Arg(2048)->Arg(16384);
BENCHMARK(BM_BellmanSweep<true>)->Name("bellman_sweep/openmp")->Arg(2048)->Arg(16384);
BENCHMARK(BM_LossBatch<kernels::Backend::kSerial>)->Name("loss_batch/serial")->Arg(64);
BENCHMARK(BM_LossBatch<kernels::Backend::kOpenMP>)->Name("loss_batch/openmp")->Arg(64);

BENCHMARK_MAIN();
