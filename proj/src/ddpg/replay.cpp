#include "skelrun/ddpg/replay.hpp"

#include <algorithm>
#include <string>

namespace skelrun::ddpg {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("ReplayBuffer: bad dims");
  stride_ = 2 * static_cast<std::size_t>(state_dim) + action_dim + 2;
}

void ReplayBuffer::store(const Transition& t) {
  if (static_cast<int>(t.state.size()) != state_dim_ ||
      static_cast<int>(t.next_state.size()) != state_dim_ ||
      static_cast<int>(t.action.size()) != action_dim_) {
    throw std::invalid_argument("ReplayBuffer::store: transition dims do not match the buffer");
  }
  double* p;
  if (size_ < capacity_) {
    data_.resize(data_.size() + stride_);
    p = data_.data() + size_ * stride_;
    ++size_;
  } else {
    p = data_.data() + cursor_ * stride_;
    cursor_ = (cursor_ + 1) % capacity_;
  }
  p = std::copy(t.state.begin(), t.state.end(), p);
  p = std::copy(t.action.begin(), t.action.end(), p);
  p = std::copy(t.next_state.begin(), t.next_state.end(), p);
  p[0] = t.reward;
  p[1] = t.terminal ? 1.0 : 0.0;
}

std::size_t ReplayBuffer::slot(std::size_t i) const {
  return size_ < capacity_ ? i : (cursor_ + i) % capacity_;
}

Transition ReplayBuffer::read_slot(std::size_t s) const {
  const double* p = data_.data() + s * stride_;
  Transition t;
  t.state.assign(p, p + state_dim_);
  p += state_dim_;
  t.action.assign(p, p + action_dim_);
  p += action_dim_;
  t.next_state.assign(p, p + state_dim_);
  p += state_dim_;
  t.reward = p[0];
  t.terminal = p[1] != 0.0;
  return t;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index " + std::to_string(i));
  return read_slot(slot(i));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<Transition> out;
  if (n == 0) return out;
  if (size_ == 0) {
    throw ReplayNotReady("replay buffer is empty; " + std::to_string(n) + " samples requested");
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(read_slot(pick(rng)));
  return out;
}

}  // namespace skelrun::ddpg
