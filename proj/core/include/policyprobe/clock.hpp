#pragma once

#include <chrono>
#include <mutex>
#include <thread>

namespace policyprobe {

// Time source seam: rate limiting, retry backoff and audit scheduling all go
// through this so tests can run on a simulated clock without real waiting.
class Clock {
public:
    using TimePoint = std::chrono::steady_clock::time_point;

    virtual ~Clock() = default;
    virtual TimePoint now() = 0;
    virtual void sleep_until(TimePoint wake) = 0;

    void sleep_for(std::chrono::milliseconds duration) { sleep_until(now() + duration); }
};

class SystemClock final : public Clock {
public:
    TimePoint now() override { return std::chrono::steady_clock::now(); }
    void sleep_until(TimePoint wake) override { std::this_thread::sleep_until(wake); }
};

// Manual clock starting at the epoch; sleeping advances time instantly.
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(TimePoint start = TimePoint{}) : now_(start) {}

    TimePoint now() override {
        std::lock_guard lock(mutex_);
        return now_;
    }

    void sleep_until(TimePoint wake) override {
        std::lock_guard lock(mutex_);
        if (wake > now_) now_ = wake;
    }

    void advance(std::chrono::milliseconds duration) {
        std::lock_guard lock(mutex_);
        now_ += duration;
    }

private:
    std::mutex mutex_;
    TimePoint now_;
};

}  // namespace policyprobe
