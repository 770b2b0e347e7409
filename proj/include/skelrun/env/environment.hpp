#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelrun/symmetry/reflection.hpp"

namespace skelrun::env {

struct EnvDescriptor {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  int max_steps = 1000;
  symmetry::ReflectionMap reflection;
  std::optional<int> pelvis_x_index;
  std::vector<int> relative_x_indices;

  void validate() const;
  bool operator==(const EnvDescriptor&) const = default;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;  // unscaled
  bool terminal = false;
  std::map<std::string, double> info;
};

// Base for every environment-side failure a worker may recover from.
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EpisodeStateError : public EnvError {
 public:
  using EnvError::EnvError;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvDescriptor& descriptor() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// Makes the listed x coordinates relative to the pelvis x and zeroes the
// pelvis slot. Idempotent.
std::vector<double> relativize(std::span<const double> obs, const EnvDescriptor& d);

}  // namespace skelrun::env
