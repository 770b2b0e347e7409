#pragma once

#include <cstdint>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/env/environment.hpp"

namespace skelrun::env {

// A cheap stochastic environment for protocol tests. Episodes always run to
// max_steps, observations are arbitrary doubles, and everything is a pure
// function of the reset seed and the action sequence.
class MockEnv final : public Environment {
 public:
  explicit MockEnv(int obs_dim = 6, int act_dim = 2, int max_steps = 1000);

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

 private:
  EnvDescriptor descriptor_;
  Rng rng_;
  std::vector<double> x_;
  std::vector<double> target_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace skelrun::env
