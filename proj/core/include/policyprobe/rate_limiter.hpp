#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "policyprobe/clock.hpp"

namespace policyprobe {

// Sliding-window token budget: over any 60-second window on the supplied
// clock, the sum of granted tokens never exceeds tokens_per_minute. Exact,
// not probabilistic — acquire() blocks until the window has room.
// Safe for concurrent acquire() from multiple threads.
class RateLimiter {
public:
    struct Grant {
        Clock::TimePoint time;
        long long tokens = 0;
    };

    RateLimiter(long long tokens_per_minute, std::shared_ptr<Clock> clock,
                bool record_grants = false);

    // Blocks until the tokens fit the window. Throws BudgetError when
    // tokens_needed exceeds the per-minute capacity (permanent refusal).
    void acquire(long long tokens_needed);

    long long capacity() const { return capacity_; }

    // Populated only when record_grants was set; the safety oracle in tests
    // replays this log against the sliding-window bound.
    std::vector<Grant> grant_log() const;

private:
    void drop_expired(Clock::TimePoint now);

    const long long capacity_;
    const std::shared_ptr<Clock> clock_;
    const bool record_grants_;

    mutable std::mutex mutex_;
    std::deque<Grant> window_;
    long long window_tokens_ = 0;
    std::vector<Grant> log_;
};

}  // namespace policyprobe
