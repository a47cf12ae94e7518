#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

namespace docloop {

// Millisecond wall clock, injectable so that tests and scripted replays are
// reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
};

class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

// Starts at `start` and advances by `step` on every read.
class SteppingClock final : public Clock {
 public:
  explicit SteppingClock(std::int64_t start = 1'700'000'000'000, std::int64_t step = 1)
      : next_(start), step_(step) {}
  std::int64_t now_ms() override { return next_.fetch_add(step_); }

 private:
  std::atomic<std::int64_t> next_;
  std::int64_t step_;
};

inline std::shared_ptr<Clock> system_clock() { return std::make_shared<SystemClock>(); }

}  // namespace docloop
