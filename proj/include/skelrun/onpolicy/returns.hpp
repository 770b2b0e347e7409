#pragma once

#include <span>
#include <vector>

#include "skelrun/onpolicy/gaussian_policy.hpp"

namespace skelrun::onpolicy {

struct EpisodeRollout {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;  // unclipped draws
  std::vector<double> rewards;
  std::vector<double> log_probs;  // under the behaviour policy
};

struct RolloutBatch {
  std::vector<EpisodeRollout> episodes;

  std::size_t total_steps() const;
  // Per-episode arrays share a length, log-probs are finite. Throws.
  void validate() const;
};

// R_t = r_t + gamma * R_{t+1}, back to front.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);

// b_t = mean of R_t over the episodes that reach step t.
std::vector<double> baseline_values(const std::vector<std::vector<double>>& returns);
std::vector<double> baseline_values(const RolloutBatch& batch, double gamma);

// R_t - b_t per episode.
std::vector<std::vector<double>> advantages(const RolloutBatch& batch, double gamma);

// (1 / total steps) * sum_i sum_t grad log pi(a_t|s_t) * (R_t - b_t).
// Ascent direction of the expected return.
std::vector<double> reinforce_gradient(const GaussianPolicy& policy, const RolloutBatch& batch,
                                       double gamma);
// Same estimator with caller-supplied advantages.
std::vector<double> reinforce_gradient(const GaussianPolicy& policy, const RolloutBatch& batch,
                                       const std::vector<std::vector<double>>& adv);

}  // namespace skelrun::onpolicy
