#pragma once

// Bilateral mirror of states and actions, and batch doubling.

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelrun/core/transition.hpp"

namespace skelrun::symmetry {

class ReflectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// out[i] = state_sign[i] * s[state_perm[i]];  a'[i] = a[action_perm[i]].
struct ReflectionMap {
  std::vector<int> state_perm;
  std::vector<int> state_sign;
  std::vector<int> action_perm;

  // Identity map of the given sizes.
  static ReflectionMap identity(int state_dim, int action_dim);

  int state_dim() const { return static_cast<int>(state_perm.size()); }
  int action_dim() const { return static_cast<int>(action_perm.size()); }

  // Permutations must be involutions and signs in {-1,+1} with
  // sign[perm[i]] == sign[i]. Throws ReflectionError.
  void validate() const;

  bool operator==(const ReflectionMap&) const = default;
};

std::vector<double> reflect_state(std::span<const double> s, const ReflectionMap& m);
std::vector<double> reflect_action(std::span<const double> a, const ReflectionMap& m);
Transition reflect_transition(const Transition& t, const ReflectionMap& m);

// Originals first, then their mirrored twins in the same order.
std::vector<Transition> augment_batch(std::span<const Transition> batch, const ReflectionMap& m);

// Three whitespace-separated rows: state_perm, state_sign, action_perm.
std::string format_reflection(const ReflectionMap& m);
ReflectionMap parse_reflection(const std::string& text);
ReflectionMap load_reflection(std::istream& in, int state_dim, int action_dim);

}  // namespace skelrun::symmetry
