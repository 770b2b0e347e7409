#pragma once

// Exploration: Ornstein-Uhlenbeck action noise with an annealed scale,
// Gaussian actor-parameter noise calibrated against an action-space
// distance, and the per-episode choice between the two.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/nn/mlp.hpp"

namespace skelrun::explore {

struct OuConfig {
  double theta = 0.1;
  double mu = 0.0;
  double sigma_start = 0.2;
  double sigma_min = 0.05;
  double dt = 1e-2;
  std::uint64_t anneal_steps = 1'000'000;

  void validate() const;
  bool operator==(const OuConfig&) const = default;
};

struct OuState {
  std::vector<double> x;
  std::uint64_t steps_taken = 0;

  OuState(int dim, double mu) : x(dim, mu) {}
};

// Euler-Maruyama step x' = x + theta*(mu - x)*dt + sigma*sqrt(dt)*eps.
// Returns x', which is also the new state.
std::vector<double> ou_step(OuState& state, const OuConfig& cfg, double sigma, Rng& rng);
std::vector<double> ou_step_with_draw(OuState& state, const OuConfig& cfg, double sigma,
                                      std::span<const double> eps);
void ou_reset(OuState& state, const OuConfig& cfg);

// Linear from sigma_start at 0 to sigma_min at anneal_steps, then flat.
double sigma_anneal(std::uint64_t steps_taken, const OuConfig& cfg);

// Adds N(0, sigma_p^2) to every parameter, layer-norm gains and biases
// included. The result is tagged perturbed; the input is untouched.
nn::ParamVector perturb_actor(const nn::ParamVector& params, double sigma_p, Rng& rng);

// sqrt(mean over action dims of mean over states of squared output gap).
double policy_distance(const nn::ParamVector& params, const nn::ParamVector& perturbed,
                       std::span<const std::vector<double>> probe_states);

struct ParamNoiseState {
  double sigma_p = 0.1;
  double target_d = 0.2;
  double alpha = 1.01;
};

// Shrinks sigma_p by alpha when d overshoots target_d, grows it otherwise
// (d == target_d grows). target_d is then set to current_sigma.
ParamNoiseState adapt_sigma(const ParamNoiseState& st, double d, double current_sigma);

enum class NoiseMode { kAction, kParam, kNone };

std::string to_string(NoiseMode m);
NoiseMode noise_mode_from_string(const std::string& s);

// kParam when u >= 1 - param_probability.
NoiseMode noise_mode_from_uniform(double u, double param_probability);
NoiseMode choose_noise_mode(Rng& rng, double param_probability = 0.3);

}  // namespace skelrun::explore
