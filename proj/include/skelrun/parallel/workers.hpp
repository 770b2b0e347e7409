#pragma once

// Sampler, trainer and tester roles. Each worker object is owned by one
// thread (or by the round-robin scheduler in deterministic mode).

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/core/transition.hpp"
#include "skelrun/ddpg/agent.hpp"
#include "skelrun/ddpg/replay.hpp"
#include "skelrun/env/environment.hpp"
#include "skelrun/explore/noise.hpp"
#include "skelrun/parallel/channels.hpp"

namespace skelrun::parallel {

// One metrics row.
struct EpisodeStats {
  double wallclock_s = 0.0;
  std::string worker_role;  // sampler, tester, final
  int worker_id = 0;
  std::uint64_t weight_version = 0;
  int episode_steps = 0;  // environment steps
  double return_unscaled = 0.0;
  explore::NoiseMode noise_mode = explore::NoiseMode::kNone;
  double sigma = 0.0;
  double sigma_p = 0.0;
  bool faulted = false;
  // Time-averaged action per component over the episode's environment steps.
  std::vector<double> mean_action;
};

// Shared environment-step allowance for all samplers. Steps are reserved
// one at a time, so the total never exceeds the limit.
class StepBudget {
 public:
  explicit StepBudget(std::uint64_t limit) : limit_(limit) {}
  bool reserve();
  std::uint64_t consumed() const { return consumed_.load(); }
  std::uint64_t limit() const { return limit_; }
  bool exhausted() const { return consumed_.load() >= limit_; }

 private:
  std::uint64_t limit_;
  std::atomic<std::uint64_t> consumed_{0};
};

struct EpisodeEnd {
  int worker_id = 0;
  bool faulted = false;
};

using Message = std::variant<std::pair<int, Transition>, EpisodeEnd>;
using MessageSink = std::function<void(Message)>;
using Clock = std::function<double()>;

struct SamplerSettings {
  explore::OuConfig ou;
  bool param_noise = true;
  double param_noise_probability = 0.3;
  double sigma_p_initial = 0.1;
  double alpha = 1.01;
  int action_repeat = 5;
  double reward_scale = 10.0;
};

class SamplerWorker {
 public:
  SamplerWorker(int worker_id, std::uint64_t run_seed, SamplerSettings settings,
                std::unique_ptr<env::Environment> env, const WeightSlot& weights);

  // Runs one episode (or as much of it as the budget allows), streaming one
  // transition per decision step, then an EpisodeEnd. Adopts the newest
  // published weights afterwards. Sends nothing and returns stats with
  // episode_steps == 0 when the budget is already exhausted.
  EpisodeStats run_episode(const MessageSink& sink, StepBudget& budget, const Clock& clock);

  int worker_id() const { return id_; }
  std::uint64_t weight_version() const { return held_.version; }
  std::uint64_t episodes() const { return episode_; }
  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t faults() const { return faults_; }
  const explore::ParamNoiseState& param_noise_state() const { return pn_; }

 private:
  int id_;
  std::uint64_t run_seed_;
  SamplerSettings s_;
  std::unique_ptr<env::Environment> env_;
  const WeightSlot& weights_;
  WeightBundle held_;
  Rng rng_;
  explore::OuState ou_;
  explore::ParamNoiseState pn_;
  std::uint64_t episode_ = 0;
  std::uint64_t env_steps_ = 0;
  std::uint64_t faults_ = 0;
};

struct TrainerStats {
  std::uint64_t transitions_received = 0;
  std::uint64_t transitions_ingested = 0;
  std::uint64_t transitions_dropped = 0;
  std::uint64_t episodes = 0;
  std::uint64_t train_steps = 0;
  std::uint64_t numerical_errors = 0;
  std::uint64_t publications = 0;
  double last_critic_loss = 0.0;
};

class TrainerWorker {
 public:
  TrainerWorker(ddpg::Agent agent, std::uint64_t run_seed, symmetry::ReflectionMap reflection,
                bool flip, WeightSlot& weights);

  // Stages transitions per worker; on EpisodeEnd commits (or drops, if
  // faulted) them, runs one train step per committed transition once warm,
  // and publishes. Returns true when it published.
  bool handle(Message m, const Clock& clock);

  const ddpg::Agent& agent() const { return agent_; }
  const ddpg::ReplayBuffer& replay() const { return replay_; }
  const TrainerStats& stats() const { return stats_; }
  // Transitions staged for episodes that have not ended yet.
  std::size_t staged() const;

 private:
  ddpg::Agent agent_;
  ddpg::ReplayBuffer replay_;
  symmetry::ReflectionMap reflection_;
  bool flip_;
  WeightSlot& weights_;
  Rng rng_;
  std::map<int, std::vector<Transition>> staging_;
  TrainerStats stats_;
};

// Noise-free evaluation with the same action repeat as training.
class TesterWorker {
 public:
  TesterWorker(std::uint64_t run_seed, int action_repeat, std::unique_ptr<env::Environment> env);

  EpisodeStats evaluate(const WeightBundle& bundle, std::uint64_t episode_seed, const Clock& clock,
                        const std::string& role = "tester");
  std::uint64_t next_seed();

 private:
  std::uint64_t run_seed_;
  int action_repeat_;
  std::unique_ptr<env::Environment> env_;
  std::uint64_t evaluations_ = 0;
};

// Environment seed of a sampler episode. Depends only on the run seed, the
// worker id and the episode index, so ablation cells see the same episodes.
std::uint64_t sampler_episode_seed(std::uint64_t run_seed, int worker_id, std::uint64_t episode);

}  // namespace skelrun::parallel
