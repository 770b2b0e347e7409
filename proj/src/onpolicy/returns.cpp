#include "skelrun/onpolicy/returns.hpp"

#include <cmath>
#include <stdexcept>

namespace skelrun::onpolicy {

std::size_t RolloutBatch::total_steps() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.rewards.size();
  return n;
}

void RolloutBatch::validate() const {
  if (episodes.empty()) throw std::invalid_argument("RolloutBatch: no episodes");
  for (const auto& e : episodes) {
    const std::size_t T = e.rewards.size();
    if (e.states.size() != T || e.actions.size() != T || e.log_probs.size() != T) {
      throw std::invalid_argument("RolloutBatch: per-episode arrays differ in length");
    }
    for (double lp : e.log_probs) {
      if (!std::isfinite(lp)) throw std::invalid_argument("RolloutBatch: non-finite log-prob");
    }
  }
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
  std::vector<double> R(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    R[k] = acc;
  }
  return R;
}

std::vector<double> baseline_values(const std::vector<std::vector<double>>& returns) {
  if (returns.empty()) throw std::invalid_argument("baseline_values: empty batch");
  std::size_t horizon = 0;
  for (const auto& r : returns) horizon = std::max(horizon, r.size());
  std::vector<double> sum(horizon, 0.0);
  std::vector<std::size_t> count(horizon, 0);
  for (const auto& r : returns) {
    for (std::size_t t = 0; t < r.size(); ++t) {
      sum[t] += r[t];
      ++count[t];
    }
  }
  for (std::size_t t = 0; t < horizon; ++t) sum[t] /= static_cast<double>(count[t]);
  return sum;
}

namespace {

std::vector<std::vector<double>> all_returns(const RolloutBatch& batch, double gamma) {
  std::vector<std::vector<double>> R;
  R.reserve(batch.episodes.size());
  for (const auto& e : batch.episodes) R.push_back(compute_returns(e.rewards, gamma));
  return R;
}

}  // namespace

std::vector<double> baseline_values(const RolloutBatch& batch, double gamma) {
  return baseline_values(all_returns(batch, gamma));
}

std::vector<std::vector<double>> advantages(const RolloutBatch& batch, double gamma) {
  auto R = all_returns(batch, gamma);
  const auto b = baseline_values(R);
  for (auto& r : R) {
    for (std::size_t t = 0; t < r.size(); ++t) r[t] -= b[t];
  }
  return R;
}

std::vector<double> reinforce_gradient(const GaussianPolicy& policy, const RolloutBatch& batch,
                                       double gamma) {
  return reinforce_gradient(policy, batch, advantages(batch, gamma));
}

std::vector<double> reinforce_gradient(const GaussianPolicy& policy, const RolloutBatch& batch,
                                       const std::vector<std::vector<double>>& adv) {
  batch.validate();
  if (adv.size() != batch.episodes.size()) {
    throw std::invalid_argument("reinforce_gradient: advantages do not match the batch");
  }
  std::vector<double> g(policy.num_params(), 0.0);
  for (std::size_t i = 0; i < batch.episodes.size(); ++i) {
    const auto& e = batch.episodes[i];
    if (adv[i].size() != e.rewards.size()) {
      throw std::invalid_argument("reinforce_gradient: advantage length mismatch");
    }
    for (std::size_t t = 0; t < e.rewards.size(); ++t) {
      if (adv[i][t] == 0.0) continue;
      const auto score = policy.log_prob_grad(e.states[t], e.actions[t]);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += score[k] * adv[i][t];
    }
  }
  const double n = static_cast<double>(batch.total_steps());
  if (n > 0) {
    for (double& x : g) x /= n;
  }
  return g;
}

}  // namespace skelrun::onpolicy
