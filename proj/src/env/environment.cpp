#include "skelrun/env/environment.hpp"

#include <algorithm>

namespace skelrun::env {

void EnvDescriptor::validate() const {
  if (obs_dim <= 0 || act_dim <= 0) throw std::invalid_argument("descriptor: dims must be > 0");
  if (max_steps <= 0) throw std::invalid_argument("descriptor: max_steps must be > 0");
  if (static_cast<int>(action_low.size()) != act_dim ||
      static_cast<int>(action_high.size()) != act_dim) {
    throw std::invalid_argument("descriptor: action bounds must have act_dim entries");
  }
  for (int i = 0; i < act_dim; ++i) {
    if (!(action_low[i] <= action_high[i])) {
      throw std::invalid_argument("descriptor: action_low > action_high");
    }
  }
  if (reflection.state_dim() != obs_dim || reflection.action_dim() != act_dim) {
    throw std::invalid_argument("descriptor: reflection map dims mismatch");
  }
  reflection.validate();
  for (int i : relative_x_indices) {
    if (i < 0 || i >= obs_dim) throw std::invalid_argument("descriptor: relative index range");
    if (pelvis_x_index && i == *pelvis_x_index) {
      throw std::invalid_argument("descriptor: relative_x_indices contains the pelvis index");
    }
  }
  if (pelvis_x_index && (*pelvis_x_index < 0 || *pelvis_x_index >= obs_dim)) {
    throw std::invalid_argument("descriptor: pelvis index range");
  }
}

std::vector<double> relativize(std::span<const double> obs, const EnvDescriptor& d) {
  if (!d.pelvis_x_index) throw std::invalid_argument("relativize: descriptor has no pelvis index");
  if (static_cast<int>(obs.size()) != d.obs_dim) {
    throw std::invalid_argument("relativize: observation length mismatch");
  }
  std::vector<double> out(obs.begin(), obs.end());
  const double px = obs[*d.pelvis_x_index];
  for (int i : d.relative_x_indices) out[i] = obs[i] - px;
  out[*d.pelvis_x_index] = 0.0;
  return out;
}

}  // namespace skelrun::env
