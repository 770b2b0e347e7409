#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/onpolicy/gaussian_policy.hpp"
#include "skelrun/onpolicy/returns.hpp"

namespace skelrun::onpolicy {

struct PpoConfig {
  double clip = 0.2;
  int epochs = 10;
  int minibatch = 64;
  double lr = 3e-4;
  double gamma = 0.99;

  void validate() const;
  bool operator==(const PpoConfig&) const = default;
};

struct PpoSample {
  std::vector<double> state;
  std::vector<double> action;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

// Flattens a batch with its advantages; old log-probs come from collection.
std::vector<PpoSample> ppo_samples(const RolloutBatch& batch,
                                   const std::vector<std::vector<double>>& adv);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A)
double clipped_objective(double ratio, double advantage, double eps);

// -mean of clipped_objective over the samples.
double ppo_clip_loss(const GaussianPolicy& policy, std::span<const PpoSample> samples, double eps);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};
LossGradient ppo_clip_loss_grad(const GaussianPolicy& policy, std::span<const PpoSample> samples,
                                double eps);

struct PpoUpdateStats {
  int steps = 0;
  double final_loss = 0.0;
  // Largest |ratio - 1| - eps over all samples after the update (<= 0 when
  // every ratio stayed inside the band).
  double max_clip_overshoot = 0.0;
};

// cfg.epochs passes of shuffled minibatch Adam steps.
PpoUpdateStats ppo_update(GaussianPolicy& policy, std::span<const PpoSample> samples,
                          const PpoConfig& cfg, nn::AdamState& opt, Rng& rng);

}  // namespace skelrun::onpolicy
