#pragma once

// SymmetricRunner: a desk-scale bilateral locomotion task.
//
// Two legs, each a damped torsional spring driven by an antagonistic muscle
// pair. Forward speed comes from the legs swinging against each other,
// pelvis height sags when the legs lean the same way, and the episode ends
// when the pelvis drops below the fall height. Three obstacles slow the
// runner unless the legs are spread to step over them. Per-leg strength is
// randomized at reset.
//
// Observation layout (obs_dim = 10):
//   0 pelvis x (relative: always 0)   5 theta right
//   1 pelvis y                        6 omega right
//   2 forward speed                   7 next obstacle x (relative)
//   3 theta left                      8 next obstacle radius
//   4 omega left                      9 fraction of episode elapsed
// Action layout (act_dim = 4): left flexor, left extensor, right flexor,
// right extensor, each in [0, 1].

#include <array>
#include <cstdint>
#include <vector>

#include "skelrun/env/environment.hpp"

namespace skelrun::env {

struct RunnerConfig {
  double dt = 0.01;
  double max_torque = 10.0;
  double damping = 0.5;
  double stiffness = 2.0;
  double speed_gain = 1.0;
  double collapse_gain = 0.2;
  double recovery_gain = 1.0;
  double target_height = 1.0;
  double fall_height = 0.65;
  double activation_penalty = 0.001;
  int obstacle_count = 3;
  double radius_min = 0.05;
  double radius_max = 0.2;
  double spacing_min = 1.0;
  double spacing_max = 3.0;
  double strength_min = 0.9;
  double strength_max = 1.1;
  // Speed multiplier while crossing an obstacle without a wide stride.
  double obstacle_slowdown = 0.2;
  double stride_clearance = 0.2;
  int max_steps = 1000;

  void validate() const;
  bool operator==(const RunnerConfig&) const = default;
};

namespace runner_obs {
inline constexpr int kPelvisX = 0;
inline constexpr int kPelvisY = 1;
inline constexpr int kSpeed = 2;
inline constexpr int kThetaLeft = 3;
inline constexpr int kOmegaLeft = 4;
inline constexpr int kThetaRight = 5;
inline constexpr int kOmegaRight = 6;
inline constexpr int kObstacleX = 7;
inline constexpr int kObstacleRadius = 8;
inline constexpr int kElapsed = 9;
inline constexpr int kDim = 10;
}  // namespace runner_obs

namespace runner_act {
inline constexpr int kLeftFlexor = 0;
inline constexpr int kLeftExtensor = 1;
inline constexpr int kRightFlexor = 2;
inline constexpr int kRightExtensor = 3;
inline constexpr int kDim = 4;
}  // namespace runner_act

struct LegState {
  double theta = 0.0;
  double omega = 0.0;
  bool operator==(const LegState&) const = default;
};

struct Obstacle {
  double x = 0.0;
  double radius = 0.0;
  bool operator==(const Obstacle&) const = default;
};

struct RunnerState {
  double pelvis_x = 0.0;
  double pelvis_y = 1.0;
  double speed = 0.0;
  std::array<LegState, 2> legs{};        // left, right
  std::array<double, 2> strength{1.0, 1.0};
  std::vector<Obstacle> obstacles;
  int steps = 0;
  bool done = false;

  bool operator==(const RunnerState&) const = default;
};

// Swaps the leg labels (state and strength); the mirror image of a runner.
RunnerState mirror_state(const RunnerState& s);

// Reflection map for the observation/action layouts above.
symmetry::ReflectionMap runner_reflection();
EnvDescriptor runner_descriptor(const RunnerConfig& cfg);

class SymmetricRunner final : public Environment {
 public:
  explicit SymmetricRunner(RunnerConfig cfg = {}, bool relativize_observations = true);

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  const RunnerConfig& config() const { return cfg_; }
  const RunnerState& state() const { return state_; }
  void set_state(RunnerState s) { state_ = std::move(s); }

  // Observation before relativization.
  std::vector<double> raw_observation() const;
  std::vector<double> observation() const;
  std::uint64_t clipped_actions() const { return clipped_actions_; }

 private:
  RunnerConfig cfg_;
  EnvDescriptor descriptor_;
  bool relativize_;
  RunnerState state_;
  std::uint64_t clipped_actions_ = 0;
};

}  // namespace skelrun::env
