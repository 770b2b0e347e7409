#include "skelrun/explore/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace skelrun::explore {

void OuConfig::validate() const {
  if (!(theta > 0.0) || !(dt > 0.0)) throw std::invalid_argument("OuConfig: theta, dt must be > 0");
  if (!(sigma_start >= sigma_min && sigma_min > 0.0)) {
    throw std::invalid_argument("OuConfig: need sigma_start >= sigma_min > 0");
  }
}

std::vector<double> ou_step_with_draw(OuState& state, const OuConfig& cfg, double sigma,
                                      std::span<const double> eps) {
  if (eps.size() != state.x.size()) throw std::invalid_argument("ou_step: draw size mismatch");
  const double diffusion = sigma * std::sqrt(cfg.dt);
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    state.x[i] += cfg.theta * (cfg.mu - state.x[i]) * cfg.dt + diffusion * eps[i];
  }
  state.steps_taken += 1;
  return state.x;
}

std::vector<double> ou_step(OuState& state, const OuConfig& cfg, double sigma, Rng& rng) {
  std::vector<double> eps(state.x.size());
  for (double& e : eps) e = standard_normal(rng);
  return ou_step_with_draw(state, cfg, sigma, eps);
}

void ou_reset(OuState& state, const OuConfig& cfg) {
  for (double& v : state.x) v = cfg.mu;
}

double sigma_anneal(std::uint64_t steps_taken, const OuConfig& cfg) {
  if (steps_taken >= cfg.anneal_steps) return cfg.sigma_min;
  const double frac = static_cast<double>(steps_taken) / static_cast<double>(cfg.anneal_steps);
  return cfg.sigma_start + (cfg.sigma_min - cfg.sigma_start) * frac;
}

nn::ParamVector perturb_actor(const nn::ParamVector& params, double sigma_p, Rng& rng) {
  if (!(sigma_p >= 0.0)) throw std::invalid_argument("perturb_actor: sigma_p must be >= 0");
  nn::ParamVector out = params;
  for (double& v : out.values()) v += sigma_p * standard_normal(rng);
  out.set_perturbed(true);
  return out;
}

double policy_distance(const nn::ParamVector& params, const nn::ParamVector& perturbed,
                       std::span<const std::vector<double>> probe_states) {
  if (probe_states.empty()) throw std::invalid_argument("policy_distance: no probe states");
  if (!params.same_layout(perturbed)) {
    throw nn::DimensionError("policy_distance: actors have different topologies");
  }
  const int n = params.spec().output_dim;
  double total = 0.0;
  for (const auto& s : probe_states) {
    const auto a = nn::predict(params, s);
    const auto b = nn::predict(perturbed, s);
    for (int i = 0; i < n; ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(total / static_cast<double>(probe_states.size()) / n);
}

ParamNoiseState adapt_sigma(const ParamNoiseState& st, double d, double current_sigma) {
  if (!(d >= 0.0)) throw std::invalid_argument("adapt_sigma: distance must be >= 0");
  ParamNoiseState next = st;
  next.sigma_p = d > st.target_d ? st.sigma_p / st.alpha : st.sigma_p * st.alpha;
  next.target_d = current_sigma;
  return next;
}

std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::kAction: return "action";
    case NoiseMode::kParam: return "param";
    case NoiseMode::kNone: return "none";
  }
  return "none";
}

NoiseMode noise_mode_from_string(const std::string& s) {
  if (s == "action") return NoiseMode::kAction;
  if (s == "param") return NoiseMode::kParam;
  if (s == "none") return NoiseMode::kNone;
  throw std::invalid_argument("unknown noise mode '" + s + "'");
}

NoiseMode noise_mode_from_uniform(double u, double param_probability) {
  return u >= 1.0 - param_probability ? NoiseMode::kParam : NoiseMode::kAction;
}

NoiseMode choose_noise_mode(Rng& rng, double param_probability) {
  return noise_mode_from_uniform(uniform01(rng), param_probability);
}

}  // namespace skelrun::explore
