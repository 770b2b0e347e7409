#pragma once

#include <vector>

namespace skelrun {

// One decision step of experience. reward is already multiplied by the
// reward scale.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

}  // namespace skelrun
