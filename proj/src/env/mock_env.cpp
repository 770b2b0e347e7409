#include "skelrun/env/mock_env.hpp"

#include <cmath>

namespace skelrun::env {

MockEnv::MockEnv(int obs_dim, int act_dim, int max_steps) {
  descriptor_.obs_dim = obs_dim;
  descriptor_.act_dim = act_dim;
  descriptor_.action_low.assign(act_dim, 0.0);
  descriptor_.action_high.assign(act_dim, 1.0);
  descriptor_.max_steps = max_steps;
  descriptor_.reflection = symmetry::ReflectionMap::identity(obs_dim, act_dim);
  descriptor_.validate();
}

std::vector<double> MockEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  const int n = descriptor_.obs_dim;
  x_.resize(n);
  target_.resize(n);
  for (double& v : x_) v = standard_normal(rng_);
  for (double& v : target_) v = uniform(rng_, -1.0, 1.0);
  steps_ = 0;
  done_ = false;
  return x_;
}

StepResult MockEnv::step(std::span<const double> action) {
  if (done_) throw EpisodeStateError("MockEnv: step on a finished episode");
  if (static_cast<int>(action.size()) != descriptor_.act_dim) {
    throw std::invalid_argument("MockEnv: action length mismatch");
  }
  const int n = descriptor_.obs_dim;
  double reward = 0.0;
  for (int i = 0; i < n; ++i) {
    const double drive = std::tanh(action[i % descriptor_.act_dim] - 0.5);
    x_[i] = 0.9 * x_[i] + 0.1 * drive + 0.05 * standard_normal(rng_);
    reward -= (x_[i] - target_[i]) * (x_[i] - target_[i]);
  }
  ++steps_;
  done_ = steps_ >= descriptor_.max_steps;
  StepResult r;
  r.observation = x_;
  r.reward = reward / n;
  r.terminal = done_;
  r.info["step"] = steps_;
  return r;
}

}  // namespace skelrun::env
