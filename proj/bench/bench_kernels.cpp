// Serial per-sample reference vs OpenMP batched kernels, a full train step,
// and sampler-count scaling of the threaded topology.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "skelrun/ddpg/agent.hpp"
#include "skelrun/env/symmetric_runner.hpp"
#include "skelrun/nn/batch.hpp"
#include "skelrun/parallel/topology.hpp"
#include "skelrun/symmetry/reflection.hpp"

using namespace skelrun;

namespace {

struct Problem {
  nn::ParamVector params;
  std::vector<double> inputs;
  std::vector<double> grads;
  int rows;
};

Problem make_problem(int rows, bool critic) {
  ddpg::AgentConfig c;
  c.state_dim = env::runner_obs::kDim;
  c.action_dim = env::runner_act::kDim;
  const auto spec = critic ? c.critic_spec() : c.actor_spec();
  Rng rng(1);
  Problem p{nn::init_params(spec, rng), {}, {}, rows};
  p.inputs.resize(static_cast<std::size_t>(rows) * spec.input_dim);
  p.grads.resize(static_cast<std::size_t>(rows) * spec.output_dim);
  for (double& x : p.inputs) x = uniform(rng, -1, 1);
  for (double& x : p.grads) x = uniform(rng, -1, 1);
  return p;
}

void BM_GradientReference(benchmark::State& state) {
  const auto p = make_problem(static_cast<int>(state.range(0)), state.range(1) != 0);
  for (auto _ : state) {
    auto g = nn::batch_gradient_reference(p.params, p.inputs, p.rows, p.grads);
    benchmark::DoNotOptimize(g.param_grad.data());
  }
  state.SetItemsProcessed(state.iterations() * p.rows);
}

void BM_GradientBatched(benchmark::State& state) {
  const auto p = make_problem(static_cast<int>(state.range(0)), state.range(1) != 0);
  nn::BatchWorkspace ws;
  for (auto _ : state) {
    auto g = nn::batch_gradient(p.params, p.inputs, p.rows, p.grads, ws);
    benchmark::DoNotOptimize(g.param_grad.data());
  }
  state.SetItemsProcessed(state.iterations() * p.rows);
  state.counters["threads"] = omp_get_max_threads();
}

void BM_TrainStep(benchmark::State& state) {
  ddpg::AgentConfig c;
  c.state_dim = env::runner_obs::kDim;
  c.action_dim = env::runner_act::kDim;
  ddpg::Agent agent(c, 1);
  Rng rng(2);
  std::vector<Transition> half;
  for (int i = 0; i < c.batch_size / 2; ++i) {
    Transition t;
    t.state.resize(c.state_dim);
    t.next_state.resize(c.state_dim);
    t.action.resize(c.action_dim);
    for (double& x : t.state) x = uniform(rng, -1, 1);
    for (double& x : t.next_state) x = uniform(rng, -1, 1);
    for (double& x : t.action) x = uniform(rng, 0, 1);
    t.reward = uniform(rng, -1, 1);
    half.push_back(t);
  }
  const auto batch = symmetry::augment_batch(half, env::runner_reflection());
  for (auto _ : state) benchmark::DoNotOptimize(agent.train_step(batch).critic_loss);
}

// Transitions ingested per wallclock second with n samplers, n = 1..6.
void BM_SamplerScaling(benchmark::State& state) {
  const int samplers = static_cast<int>(state.range(0));
  std::uint64_t ingested = 0;
  double seconds = 0.0;
  for (auto _ : state) {
    parallel::TopologyConfig cfg;
    cfg.n_workers = samplers + 2;
    cfg.env_step_budget = 60'000;
    cfg.final_eval_episodes = 0;
    cfg.env_factory = [] { return std::make_unique<env::SymmetricRunner>(); };
    const auto r = parallel::run_topology(cfg);
    ingested += r.trainer.transitions_ingested;
    seconds += r.elapsed_s;
  }
  state.counters["transitions_per_s"] = ingested / seconds;
}

}  // namespace

BENCHMARK(BM_GradientReference)->Args({200, 0})->Args({200, 1})->Args({400, 1})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientBatched)->Args({200, 0})->Args({200, 1})->Args({400, 1})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SamplerScaling)->DenseRange(1, 6)->Iterations(1)->Unit(benchmark::kSecond)->UseRealTime();

BENCHMARK_MAIN();
