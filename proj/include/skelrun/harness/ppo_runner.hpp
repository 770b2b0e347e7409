#pragma once

#include <cstdint>
#include <filesystem>

#include "skelrun/harness/config.hpp"
#include "skelrun/parallel/topology.hpp"

namespace skelrun::harness {

// Single-process PPO baseline on the configured environment. Collects
// ppo.rollout_steps environment steps per update with the same action repeat
// as DDPG, then evaluates the mean action noise-free. Rows use the same
// schema as DDPG runs; weight_version counts policy updates.
parallel::RunResult run_ppo(const ExperimentConfig& cfg, std::uint64_t seed,
                            const parallel::EpisodeCallback& on_episode = {},
                            const std::filesystem::path& checkpoint = {});

}  // namespace skelrun::harness
