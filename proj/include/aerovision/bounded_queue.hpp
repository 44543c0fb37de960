#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

#include "aerovision/error.hpp"

namespace aerovision {

enum class DropPolicy { DropOldest, Block };

struct QueueStats {
  std::size_t capacity = 0;
  std::size_t high_water = 0;
  std::size_t full_events = 0;  // pushes that found the queue full
  std::size_t dropped = 0;
};

/// Bounded FIFO connecting two pipeline stages. A full queue either evicts its
/// oldest element (DropOldest) or blocks the producer (Block). close() wakes
/// both sides; pushes to a closed queue fail and pops drain what is left.
template <typename T>
class BoundedQueue {
 public:
  enum class PushResult { Ok, DroppedOldest, Closed };

  BoundedQueue(std::size_t capacity, DropPolicy policy) : capacity_(capacity), policy_(policy) {
    if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "queue capacity must be >= 1");
    stats_.capacity = capacity_;
  }

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  /// Applies the queue's drop policy.
  PushResult push(T item) { return push_impl(std::move(item), policy_); }

  /// Always waits for space; used for control messages that must not be lost.
  PushResult push_blocking(T item) { return push_impl(std::move(item), DropPolicy::Block); }

  /// Blocks until an element is available; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

  QueueStats stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
  }

 private:
  PushResult push_impl(T item, DropPolicy policy) {
    std::unique_lock lock(mutex_);
    if (closed_) return PushResult::Closed;
    PushResult result = PushResult::Ok;
    if (items_.size() >= capacity_) {
      ++stats_.full_events;
      if (policy == DropPolicy::DropOldest) {
        items_.pop_front();
        ++stats_.dropped;
        result = PushResult::DroppedOldest;
      } else {
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return PushResult::Closed;
      }
    }
    items_.push_back(std::move(item));
    if (items_.size() > stats_.high_water) stats_.high_water = items_.size();
    not_empty_.notify_one();
    return result;
  }

  const std::size_t capacity_;
  const DropPolicy policy_;
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  QueueStats stats_;
  bool closed_ = false;
};

}  // namespace aerovision
