#pragma once

// The two structures shared between workers: a bounded transition queue and
// a single latest-value weight slot.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>

#include "skelrun/nn/mlp.hpp"

namespace skelrun::parallel {

// Multi-producer queue. push blocks while full; pop blocks while empty.
// After close(), push returns false and pop drains what is left.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("BoundedQueue: capacity must be positive");
  }

  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  // Non-blocking; false when full or closed.
  bool try_push(T item) {
    std::lock_guard lock(mu_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return take(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mu_);
    return take(lock);
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  std::size_t capacity() const { return capacity_; }

 private:
  std::optional<T> take(std::unique_lock<std::mutex>&) {
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct WeightBundle {
  std::shared_ptr<const nn::ParamVector> actor;
  std::uint64_t version = 0;
  double published_s = 0.0;
};

// Latest-value slot. Bundles are immutable once published, so readers hold
// a complete snapshot for as long as they keep the pointer.
class WeightSlot {
 public:
  explicit WeightSlot(WeightBundle initial);

  // Versions must strictly increase.
  void publish(WeightBundle bundle);
  WeightBundle fetch() const;
  std::uint64_t version() const;
  std::uint64_t publications() const;

  // Waits until a version newer than `seen` exists, the slot is closed, or
  // the timeout passes. Returns the latest bundle either way.
  WeightBundle wait_newer(std::uint64_t seen, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  WeightBundle latest_;
  std::uint64_t publications_ = 0;
  bool closed_ = false;
};

}  // namespace skelrun::parallel
