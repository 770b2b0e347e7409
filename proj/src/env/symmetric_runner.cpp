#include "skelrun/env/symmetric_runner.hpp"

#include <algorithm>
#include <cmath>

#include "skelrun/core/random.hpp"

namespace skelrun::env {

void RunnerConfig::validate() const {
  if (!(fall_height < target_height)) throw std::invalid_argument("RunnerConfig: fall >= target");
  if (!(dt > 0.0 && max_torque > 0.0 && damping > 0.0 && stiffness > 0.0 && speed_gain > 0.0 &&
        collapse_gain > 0.0 && recovery_gain > 0.0)) {
    throw std::invalid_argument("RunnerConfig: gains must be positive");
  }
  if (obstacle_count < 0 || max_steps <= 0) throw std::invalid_argument("RunnerConfig: counts");
  if (!(radius_min <= radius_max && spacing_min <= spacing_max && strength_min <= strength_max)) {
    throw std::invalid_argument("RunnerConfig: empty range");
  }
}

RunnerState mirror_state(const RunnerState& s) {
  RunnerState m = s;
  std::swap(m.legs[0], m.legs[1]);
  std::swap(m.strength[0], m.strength[1]);
  return m;
}

symmetry::ReflectionMap runner_reflection() {
  using namespace runner_obs;
  symmetry::ReflectionMap m = symmetry::ReflectionMap::identity(runner_obs::kDim, runner_act::kDim);
  std::swap(m.state_perm[kThetaLeft], m.state_perm[kThetaRight]);
  std::swap(m.state_perm[kOmegaLeft], m.state_perm[kOmegaRight]);
  m.action_perm = {runner_act::kRightFlexor, runner_act::kRightExtensor, runner_act::kLeftFlexor,
                   runner_act::kLeftExtensor};
  return m;
}

EnvDescriptor runner_descriptor(const RunnerConfig& cfg) {
  EnvDescriptor d;
  d.obs_dim = runner_obs::kDim;
  d.act_dim = runner_act::kDim;
  d.action_low.assign(d.act_dim, 0.0);
  d.action_high.assign(d.act_dim, 1.0);
  d.max_steps = cfg.max_steps;
  d.reflection = runner_reflection();
  d.pelvis_x_index = runner_obs::kPelvisX;
  d.relative_x_indices = {runner_obs::kObstacleX};
  return d;
}

SymmetricRunner::SymmetricRunner(RunnerConfig cfg, bool relativize_observations)
    : cfg_(cfg), descriptor_(runner_descriptor(cfg)), relativize_(relativize_observations) {
  cfg_.validate();
  descriptor_.validate();
  state_.done = true;
}

std::vector<double> SymmetricRunner::reset(std::uint64_t seed) {
  Rng rng(seed);
  RunnerState s;
  s.pelvis_y = cfg_.target_height;
  s.strength[0] = uniform(rng, cfg_.strength_min, cfg_.strength_max);
  s.strength[1] = uniform(rng, cfg_.strength_min, cfg_.strength_max);
  double x = 0.0;
  for (int i = 0; i < cfg_.obstacle_count; ++i) {
    x += uniform(rng, cfg_.spacing_min, cfg_.spacing_max);
    s.obstacles.push_back({x, uniform(rng, cfg_.radius_min, cfg_.radius_max)});
  }
  state_ = std::move(s);
  return observation();
}

std::vector<double> SymmetricRunner::raw_observation() const {
  using namespace runner_obs;
  std::vector<double> o(kDim, 0.0);
  o[kPelvisX] = state_.pelvis_x;
  o[kPelvisY] = state_.pelvis_y;
  o[kSpeed] = state_.speed;
  o[kThetaLeft] = state_.legs[0].theta;
  o[kOmegaLeft] = state_.legs[0].omega;
  o[kThetaRight] = state_.legs[1].theta;
  o[kOmegaRight] = state_.legs[1].omega;
  o[kObstacleX] = state_.pelvis_x + 10.0;
  o[kObstacleRadius] = 0.0;
  for (const Obstacle& ob : state_.obstacles) {
    if (ob.x + ob.radius >= state_.pelvis_x) {
      o[kObstacleX] = ob.x;
      o[kObstacleRadius] = ob.radius;
      break;
    }
  }
  o[kElapsed] = static_cast<double>(state_.steps) / cfg_.max_steps;
  return o;
}

std::vector<double> SymmetricRunner::observation() const {
  auto raw = raw_observation();
  return relativize_ ? relativize(raw, descriptor_) : raw;
}

StepResult SymmetricRunner::step(std::span<const double> action) {
  if (state_.done) throw EpisodeStateError("SymmetricRunner: step on a finished episode; reset first");
  if (static_cast<int>(action.size()) != runner_act::kDim) {
    throw std::invalid_argument("SymmetricRunner: action must have 4 components");
  }
  std::array<double, runner_act::kDim> a{};
  for (int i = 0; i < runner_act::kDim; ++i) {
    a[i] = std::clamp(action[i], 0.0, 1.0);
    if (a[i] != action[i]) ++clipped_actions_;
  }
  RunnerState& s = state_;
  const double dt = cfg_.dt;
  for (int leg = 0; leg < 2; ++leg) {
    const double flex = a[2 * leg];
    const double ext = a[2 * leg + 1];
    const double torque = s.strength[leg] * cfg_.max_torque * (flex - ext);
    LegState& L = s.legs[leg];
    L.omega = L.omega + dt * (torque - cfg_.damping * L.omega - cfg_.stiffness * L.theta);
    L.theta = L.theta + dt * L.omega;
  }
  const double theta_l = s.legs[0].theta;
  const double theta_r = s.legs[1].theta;
  double v = cfg_.speed_gain * std::abs(s.legs[0].omega - s.legs[1].omega);
  const double x0 = s.pelvis_x;
  const double x1 = x0 + dt * v;
  bool contact = false;
  if (std::abs(theta_l - theta_r) < cfg_.stride_clearance) {
    for (const Obstacle& ob : s.obstacles) {
      if (x0 <= ob.x + ob.radius && x1 >= ob.x - ob.radius) {
        contact = true;
        break;
      }
    }
  }
  if (contact) v *= cfg_.obstacle_slowdown;
  s.speed = v;
  s.pelvis_x = x0 + dt * v;
  s.pelvis_y = s.pelvis_y + dt * (cfg_.recovery_gain * (cfg_.target_height - s.pelvis_y) -
                                   cfg_.collapse_gain * std::abs(theta_l + theta_r));
  // Per-leg sums first so the mirrored action gives a bit-identical penalty.
  const double usage = (a[0] + a[1]) + (a[2] + a[3]);
  s.steps += 1;
  s.done = s.pelvis_y < cfg_.fall_height || s.steps >= cfg_.max_steps;

  StepResult r;
  r.reward = (s.pelvis_x - x0) - cfg_.activation_penalty * usage;
  r.terminal = s.done;
  r.observation = observation();
  r.info["pelvis_x"] = s.pelvis_x;
  r.info["pelvis_y"] = s.pelvis_y;
  r.info["obstacle_contact"] = contact ? 1.0 : 0.0;
  return r;
}

}  // namespace skelrun::env
