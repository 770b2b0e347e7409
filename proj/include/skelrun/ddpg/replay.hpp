#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "skelrun/core/random.hpp"
#include "skelrun/core/transition.hpp"

namespace skelrun::ddpg {

// Thrown by sample() while the buffer holds fewer than the requested items.
class ReplayNotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FIFO ring of transitions in flat storage. Memory grows with use up to
// capacity, then the oldest entry is overwritten.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void store(const Transition& t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  // i-th stored transition counting from the oldest.
  Transition at(std::size_t i) const;

  // n uniform draws with replacement.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t slot(std::size_t i) const;
  Transition read_slot(std::size_t s) const;

  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  std::size_t stride_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;  // next slot to write once full
  // Per slot: state, action, next_state, reward, terminal.
  std::vector<double> data_;
};

}  // namespace skelrun::ddpg
