#include "skelrun/onpolicy/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace skelrun::onpolicy {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("ppo.clip must lie in (0,1)");
  if (epochs <= 0 || minibatch <= 0) throw std::invalid_argument("ppo epochs/minibatch must be > 0");
  if (!(lr > 0.0)) throw std::invalid_argument("ppo.lr must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ppo.gamma must lie in [0,1)");
}

std::vector<PpoSample> ppo_samples(const RolloutBatch& batch,
                                   const std::vector<std::vector<double>>& adv) {
  batch.validate();
  if (adv.size() != batch.episodes.size()) {
    throw std::invalid_argument("ppo_samples: advantages do not match the batch");
  }
  std::vector<PpoSample> out;
  out.reserve(batch.total_steps());
  for (std::size_t i = 0; i < batch.episodes.size(); ++i) {
    const auto& e = batch.episodes[i];
    for (std::size_t t = 0; t < e.rewards.size(); ++t) {
      out.push_back(PpoSample{e.states[t], e.actions[t], e.log_probs[t], adv[i][t]});
    }
  }
  return out;
}

double clipped_objective(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double ppo_clip_loss(const GaussianPolicy& policy, std::span<const PpoSample> samples, double eps) {
  if (samples.empty()) throw std::invalid_argument("ppo_clip_loss: no samples");
  double sum = 0.0;
  for (const auto& s : samples) {
    const double ratio = std::exp(policy.log_prob(s.state, s.action) - s.old_log_prob);
    sum += clipped_objective(ratio, s.advantage, eps);
  }
  return -sum / static_cast<double>(samples.size());
}

LossGradient ppo_clip_loss_grad(const GaussianPolicy& policy, std::span<const PpoSample> samples,
                                double eps) {
  if (samples.empty()) throw std::invalid_argument("ppo_clip_loss_grad: no samples");
  LossGradient out;
  out.grad.assign(policy.num_params(), 0.0);
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (const auto& s : samples) {
    double lp = 0.0;
    const auto score = policy.log_prob_grad(s.state, s.action, &lp);
    const double ratio = std::exp(lp - s.old_log_prob);
    const double unclipped = ratio * s.advantage;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * s.advantage;
    sum += std::min(unclipped, clipped);
    // The clipped branch is constant in the parameters.
    if (unclipped <= clipped) {
      const double w = -s.advantage * ratio / n;
      for (std::size_t k = 0; k < score.size(); ++k) out.grad[k] += w * score[k];
    }
  }
  out.loss = -sum / n;
  return out;
}

PpoUpdateStats ppo_update(GaussianPolicy& policy, std::span<const PpoSample> samples,
                          const PpoConfig& cfg, nn::AdamState& opt, Rng& rng) {
  cfg.validate();
  PpoUpdateStats st;
  if (samples.empty()) return st;
  if (opt.m.size() != policy.num_params()) {
    throw nn::DimensionError("ppo_update: optimizer state does not match the policy");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<PpoSample> mb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
      mb.clear();
      for (std::size_t k = start; k < end; ++k) mb.push_back(samples[order[k]]);
      LossGradient lg = ppo_clip_loss_grad(policy, mb, cfg.clip);
      policy.apply_gradient(lg.grad, opt, cfg.lr);
      st.final_loss = lg.loss;
      ++st.steps;
    }
  }
  st.max_clip_overshoot = -cfg.clip;
  for (const auto& s : samples) {
    const double ratio = std::exp(policy.log_prob(s.state, s.action) - s.old_log_prob);
    st.max_clip_overshoot = std::max(st.max_clip_overshoot, std::abs(ratio - 1.0) - cfg.clip);
  }
  return st;
}

}  // namespace skelrun::onpolicy
