#pragma once

// Deep deterministic policy gradient learner.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/core/transition.hpp"
#include "skelrun/nn/batch.hpp"
#include "skelrun/nn/mlp.hpp"

namespace skelrun::ddpg {

struct AgentConfig {
  int state_dim = 0;
  int action_dim = 0;
  double gamma = 0.9;
  // Transitions per gradient step after augmentation.
  int batch_size = 200;
  // false: sample batch_size/2 and mirror up to batch_size.
  // true: sample batch_size and mirror up to 2*batch_size.
  bool flip_doubles_batch = false;
  double reward_scale = 10.0;
  int action_repeat = 5;
  double tau = 1e-3;
  std::size_t replay_capacity = 5'000'000;
  // Training starts once replay holds warmup_factor * batch_size transitions.
  int warmup_factor = 10;
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 32};
  nn::Activation actor_activation = nn::Activation::kElu;
  nn::Activation critic_activation = nn::Activation::kTanh;
  bool layer_norm = true;
  nn::LinearSchedule actor_lr{1e-3, 5e-5, 10'000'000};
  nn::LinearSchedule critic_lr{2e-3, 5e-5, 10'000'000};

  nn::MlpSpec actor_spec() const;
  // Input is state followed by action.
  nn::MlpSpec critic_spec() const;
  std::size_t warmup_size() const {
    return static_cast<std::size_t>(warmup_factor) * static_cast<std::size_t>(batch_size);
  }
  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

// Canonical flat key/value form under the "ddpg." namespace.
std::map<std::string, std::string> agent_config_entries(const AgentConfig& cfg);
// Returns false for keys this struct does not own. Throws on bad values.
bool set_agent_config_entry(AgentConfig& cfg, const std::string& key, const std::string& value);

double critic_target(double r, bool terminal, double q_next, double gamma);
double scale_reward(double raw, double scale = 10.0);
// target <- tau * params + (1 - tau) * target
void target_update(const nn::ParamVector& params, nn::ParamVector& target, double tau);

// Raised when a train step meets a non-finite loss or gradient. The agent is
// left exactly as it was.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string network, std::size_t first_index,
                 std::size_t count)
      : std::runtime_error(what), network(std::move(network)), first_index(first_index),
        count(count) {}
  std::string network;
  std::size_t first_index;
  std::size_t count;
};

struct TrainStats {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

struct Gradients {
  double critic_loss = 0.0;
  double mean_q = 0.0;
  std::vector<double> critic;  // d loss / d critic params
  std::vector<double> actor;   // d (-mean Q(s, pi(s))) / d actor params
};

class Agent {
 public:
  Agent(AgentConfig cfg, std::uint64_t seed);

  const AgentConfig& config() const { return cfg_; }
  const nn::ParamVector& actor() const { return actor_; }
  const nn::ParamVector& critic() const { return critic_; }
  const nn::ParamVector& target_actor() const { return target_actor_; }
  const nn::ParamVector& target_critic() const { return target_critic_; }
  std::uint64_t train_steps() const { return actor_opt_.step; }

  // Both gradients are taken at the current parameters; the actor's goes
  // through the critic as it is before this step's update.
  Gradients compute_gradients(std::span<const Transition> batch);

  // One critic step, one actor step, then both target blends. batch is used
  // as given (already augmented).
  TrainStats train_step(std::span<const Transition> batch);

  // Restores networks from a checkpoint; optimizer moments start fresh and
  // the step counter resumes at the actor's version.
  void load(nn::ParamVector actor, nn::ParamVector critic, nn::ParamVector target_actor,
            nn::ParamVector target_critic);

 private:
  AgentConfig cfg_;
  nn::ParamVector actor_;
  nn::ParamVector critic_;
  nn::ParamVector target_actor_;
  nn::ParamVector target_critic_;
  nn::AdamState actor_opt_;
  nn::AdamState critic_opt_;

  nn::BatchWorkspace ws_target_actor_;
  nn::BatchWorkspace ws_target_critic_;
  nn::BatchWorkspace ws_critic_;
  nn::BatchWorkspace ws_actor_;
  nn::BatchWorkspace ws_critic_pi_;
  std::vector<double> states_, next_states_, sa_, sa_next_, sa_pi_, dq_, dsa_, da_;
};

// Adds exploration noise in place; the result is clipped afterwards.
using NoiseHook = std::function<void(std::span<double>)>;

// Holds each fresh actor output for action_repeat consecutive steps.
class ActionRepeater {
 public:
  explicit ActionRepeater(int action_repeat);

  // Fresh output on step_index % action_repeat == 0, or when nothing is
  // cached yet; the cached action otherwise. Fresh outputs get the noise hook
  // and are clipped to [0, 1].
  std::vector<double> act(const nn::ParamVector& actor, std::span<const double> observation,
                          int step_index, const NoiseHook& noise = {});

  bool is_decision_step(int step_index) const { return step_index % repeat_ == 0; }
  std::uint64_t fresh_evaluations() const { return fresh_; }
  void reset();

 private:
  int repeat_;
  std::vector<double> cached_;
  std::uint64_t fresh_ = 0;
};

}  // namespace skelrun::ddpg
