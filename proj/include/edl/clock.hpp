#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

namespace edl {

using Duration = std::chrono::nanoseconds;
using TimePoint = std::chrono::nanoseconds;  // offset from clock epoch

// Injectable time source. SystemClock maps to the steady clock; ManualClock
// is advanced explicitly by tests and wakes every sleeper on each advance.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  // Blocks until now() >= t. Under ManualClock this parks the caller until
  // some other thread advances time past t.
  virtual void sleep_until(TimePoint t) = 0;
  // Waits on cv (which guards state via lk) until pred() holds or the clock
  // reaches t. Returns pred() at wake. Under ManualClock the cv is also
  // notified on every advance so deadline waits make progress in sim time.
  virtual bool wait_until(std::condition_variable_any& cv, std::unique_lock<std::mutex>& lk,
                          TimePoint t, std::function<bool()> pred) = 0;
  void sleep_for(Duration d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
 public:
  SystemClock() : start_(std::chrono::steady_clock::now()) {}
  TimePoint now() const override {
    return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start_);
  }
  void sleep_until(TimePoint t) override {
    std::this_thread::sleep_until(start_ + t);
  }
  bool wait_until(std::condition_variable_any& cv, std::unique_lock<std::mutex>& lk,
                  TimePoint t, std::function<bool()> pred) override {
    return cv.wait_until(lk, start_ + t, std::move(pred));
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

class ManualClock final : public Clock {
 public:
  TimePoint now() const override {
    std::lock_guard lk(mu_);
    return t_;
  }
  void sleep_until(TimePoint t) override {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return t_ >= t || stopped_; });
  }
  bool wait_until(std::condition_variable_any& cv, std::unique_lock<std::mutex>& lk,
                  TimePoint t, std::function<bool()> pred) override {
    {
      std::lock_guard reg(mu_);
      waiters_.insert(&cv);
    }
    cv.wait(lk, [&] { return pred() || now() >= t || stopped_flag(); });
    {
      std::lock_guard reg(mu_);
      waiters_.erase(&cv);
    }
    return pred();
  }
  void advance(Duration d) {
    std::set<std::condition_variable_any*> ws;
    {
      std::lock_guard lk(mu_);
      t_ += d;
      ws = waiters_;
    }
    cv_.notify_all();
    for (auto* w : ws) w->notify_all();
  }
  void advance_to(TimePoint t) {
    std::set<std::condition_variable_any*> ws;
    {
      std::lock_guard lk(mu_);
      if (t > t_) t_ = t;
      ws = waiters_;
    }
    cv_.notify_all();
    for (auto* w : ws) w->notify_all();
  }
  // Releases all sleepers regardless of target; used on teardown.
  void stop() {
    std::set<std::condition_variable_any*> ws;
    {
      std::lock_guard lk(mu_);
      stopped_ = true;
      ws = waiters_;
    }
    cv_.notify_all();
    for (auto* w : ws) w->notify_all();
  }

 private:
  bool stopped_flag() const {
    std::lock_guard lk(mu_);
    return stopped_;
  }
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::set<std::condition_variable_any*> waiters_;
  TimePoint t_{};
  bool stopped_ = false;
};

inline Duration ms(int64_t v) { return std::chrono::duration_cast<Duration>(std::chrono::milliseconds(v)); }
inline Duration us(int64_t v) { return std::chrono::duration_cast<Duration>(std::chrono::microseconds(v)); }
inline Duration secs(double v) {
  return Duration(static_cast<int64_t>(v * 1e9));
}
inline double to_secs(Duration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace edl
