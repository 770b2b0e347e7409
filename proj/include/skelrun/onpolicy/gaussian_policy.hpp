#pragma once

#include <span>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/nn/mlp.hpp"

namespace skelrun::onpolicy {

// Diagonal Gaussian with a network mean and a state-independent log-std.
// Flat parameter order: mean network values, then log_std.
class GaussianPolicy {
 public:
  GaussianPolicy(const nn::MlpSpec& mean_spec, Rng& rng, double initial_std = 0.3);

  int action_dim() const { return mean_.spec().output_dim; }
  int state_dim() const { return mean_.spec().input_dim; }
  std::size_t num_params() const { return mean_.size() + log_std_.size(); }

  const nn::ParamVector& mean_params() const { return mean_; }
  std::span<const double> log_std() const { return log_std_; }
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);

  std::vector<double> mean(std::span<const double> state) const;
  // Unclipped draw; clip at the environment boundary only.
  std::vector<double> sample(std::span<const double> state, Rng& rng) const;
  double log_prob(std::span<const double> state, std::span<const double> action) const;
  // d log_prob / d flat params; also returns log_prob through the pointer.
  std::vector<double> log_prob_grad(std::span<const double> state, std::span<const double> action,
                                    double* log_prob_out = nullptr) const;

  // Adam step on the flat parameters (gradient of a loss to minimize).
  void apply_gradient(std::span<const double> grad, nn::AdamState& state, double lr);

 private:
  nn::ParamVector mean_;
  std::vector<double> log_std_;
};

}  // namespace skelrun::onpolicy
