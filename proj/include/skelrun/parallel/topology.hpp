#pragma once

// n workers: n-2 samplers, one trainer, one tester.
//
// Threaded mode runs each role on its own thread. Deterministic mode runs
// the same workers on the calling thread in round-robin order: one sampler
// episode, then the trainer drains the queue, then the tester evaluates if
// a publication is due. Its clock is logical (consumed environment steps
// divided by 1000), so its output is a pure function of the config.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "skelrun/ddpg/agent.hpp"
#include "skelrun/env/environment.hpp"
#include "skelrun/parallel/workers.hpp"

namespace skelrun::parallel {

struct TopologyConfig {
  int n_workers = 8;
  // state_dim/action_dim of 0 are filled in from the environment.
  ddpg::AgentConfig agent;
  SamplerSettings sampler;
  bool flip = true;
  std::uint64_t seed = 1;
  std::uint64_t env_step_budget = 200'000;
  // Threaded mode only; 0 means no limit.
  double wallclock_budget_s = 0.0;
  bool deterministic = false;
  // Deterministic mode: evaluate after every test_every-th publication.
  int test_every = 1;
  // Noise-free episodes on the final weights after the budget is spent.
  // Skipped when no environment step was taken.
  int final_eval_episodes = 5;
  std::size_t queue_capacity = 10'000;
  // A sampler stops after this many faulted episodes in a row.
  int max_consecutive_faults = 10;
  env::EnvFactory env_factory;

  int samplers() const { return n_workers - 2; }
  void validate() const;
};

struct RunResult {
  // Every metrics row in emission order.
  std::vector<EpisodeStats> episodes;
  std::vector<double> final_returns;
  TrainerStats trainer;
  std::optional<ddpg::Agent> agent;
  std::uint64_t env_steps = 0;
  std::uint64_t sampler_faults = 0;
  double elapsed_s = 0.0;
};

using EpisodeCallback = std::function<void(const EpisodeStats&)>;

// Rows are also passed to on_episode as they are produced, from one thread
// at a time.
RunResult run_topology(const TopologyConfig& cfg, const EpisodeCallback& on_episode = {});

std::uint64_t final_eval_seed(std::uint64_t run_seed, int index);

}  // namespace skelrun::parallel
