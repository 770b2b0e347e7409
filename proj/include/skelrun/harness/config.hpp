#pragma once

// Experiment configuration as canonical key=value text: one entry per line,
// flat dotted keys, sorted, '#' comments and blank lines ignored on input.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "skelrun/ddpg/agent.hpp"
#include "skelrun/env/environment.hpp"
#include "skelrun/env/symmetric_runner.hpp"
#include "skelrun/explore/noise.hpp"
#include "skelrun/onpolicy/ppo.hpp"
#include "skelrun/parallel/topology.hpp"

namespace skelrun::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string algo = "ddpg";  // ddpg, ppo
  bool layer_norm = true;
  bool param_noise = true;
  bool flip = true;
  int n_workers = 8;
  // "symmetric_runner" or a remote endpoint (tcp://, exec:, loopback).
  std::string env = "symmetric_runner";
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t env_steps = 200'000;
  double wallclock_s = 0.0;
  bool deterministic = false;
  int test_every = 10;
  int final_eval_episodes = 5;
  std::size_t queue_capacity = 10'000;
  double remote_timeout_s = 60.0;
  bool remote_relativize = false;

  // Dims are taken from the environment; layer_norm comes from the toggle.
  ddpg::AgentConfig agent;
  explore::OuConfig ou;
  double param_noise_probability = 0.3;
  double sigma_p_initial = 0.1;
  double param_noise_alpha = 1.01;
  env::RunnerConfig runner;
  onpolicy::PpoConfig ppo;
  int ppo_rollout_steps = 2048;

  // Short tag for the enabled toggles, e.g. "LN+noise+flip".
  std::string label() const;
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg);
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Applies one "key=value" override. Throws ConfigError on unknown keys.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void set_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

env::EnvFactory make_env_factory(const ExperimentConfig& cfg);
parallel::TopologyConfig make_topology(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace skelrun::harness
