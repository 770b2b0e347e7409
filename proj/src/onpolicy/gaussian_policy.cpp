#include "skelrun/onpolicy/gaussian_policy.hpp"

#include <cmath>
#include <numbers>

namespace skelrun::onpolicy {

GaussianPolicy::GaussianPolicy(const nn::MlpSpec& mean_spec, Rng& rng, double initial_std)
    : mean_(nn::init_params(mean_spec, rng)),
      log_std_(mean_spec.output_dim, std::log(initial_std)) {
  if (!(initial_std > 0.0)) throw std::invalid_argument("GaussianPolicy: std must be positive");
}

std::vector<double> GaussianPolicy::flat_params() const {
  std::vector<double> flat(mean_.values().begin(), mean_.values().end());
  flat.insert(flat.end(), log_std_.begin(), log_std_.end());
  return flat;
}

void GaussianPolicy::set_flat_params(std::span<const double> flat) {
  if (flat.size() != num_params()) throw nn::DimensionError("GaussianPolicy: flat size mismatch");
  auto v = mean_.values();
  std::copy(flat.begin(), flat.begin() + v.size(), v.begin());
  std::copy(flat.begin() + v.size(), flat.end(), log_std_.begin());
  mean_.set_version(mean_.version() + 1);
}

std::vector<double> GaussianPolicy::mean(std::span<const double> state) const {
  return nn::predict(mean_, state);
}

std::vector<double> GaussianPolicy::sample(std::span<const double> state, Rng& rng) const {
  std::vector<double> a = mean(state);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += std::exp(log_std_[i]) * standard_normal(rng);
  return a;
}

double GaussianPolicy::log_prob(std::span<const double> state,
                                std::span<const double> action) const {
  if (static_cast<int>(action.size()) != action_dim()) {
    throw nn::DimensionError("GaussianPolicy: action length mismatch");
  }
  const std::vector<double> mu = mean(state);
  double lp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double z = (action[i] - mu[i]) * std::exp(-log_std_[i]);
    lp += -0.5 * z * z - log_std_[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

std::vector<double> GaussianPolicy::log_prob_grad(std::span<const double> state,
                                                  std::span<const double> action,
                                                  double* log_prob_out) const {
  if (static_cast<int>(action.size()) != action_dim()) {
    throw nn::DimensionError("GaussianPolicy: action length mismatch");
  }
  nn::ForwardResult fr = nn::forward(mean_, state);
  const std::size_t n = fr.output.size();
  std::vector<double> dmu(n);
  std::vector<double> grad(num_params());
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_var = std::exp(-2.0 * log_std_[i]);
    const double diff = action[i] - fr.output[i];
    dmu[i] = diff * inv_var;
    grad[mean_.size() + i] = diff * diff * inv_var - 1.0;
    lp += -0.5 * diff * diff * inv_var - log_std_[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  nn::BackwardResult br = nn::backward(mean_, fr.cache, dmu);
  std::copy(br.param_grad.begin(), br.param_grad.end(), grad.begin());
  if (log_prob_out) *log_prob_out = lp;
  return grad;
}

void GaussianPolicy::apply_gradient(std::span<const double> grad, nn::AdamState& state,
                                    double lr) {
  std::vector<double> flat = flat_params();
  nn::adam_update(flat, grad, state, lr);
  set_flat_params(flat);
}

}  // namespace skelrun::onpolicy
