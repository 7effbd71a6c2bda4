#include "policyprobe/rate_limiter.hpp"

#include "policyprobe/errors.hpp"

namespace policyprobe {

namespace {
constexpr auto kWindow = std::chrono::seconds(60);
}

RateLimiter::RateLimiter(long long tokens_per_minute, std::shared_ptr<Clock> clock,
                         bool record_grants)
    : capacity_(tokens_per_minute), clock_(std::move(clock)), record_grants_(record_grants) {
    if (capacity_ <= 0) throw BudgetError("tokens_per_minute must be positive");
    if (!clock_) throw BudgetError("rate limiter needs a clock");
}

void RateLimiter::drop_expired(Clock::TimePoint now) {
    while (!window_.empty() && now - window_.front().time >= kWindow) {
        window_tokens_ -= window_.front().tokens;
        window_.pop_front();
    }
}

void RateLimiter::acquire(long long tokens_needed) {
    if (tokens_needed < 0) throw BudgetError("tokens_needed must be non-negative");
    if (tokens_needed > capacity_)
        throw BudgetError("request of " + std::to_string(tokens_needed) +
                          " tokens exceeds the per-minute capacity of " +
                          std::to_string(capacity_));
    if (tokens_needed == 0) return;

    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = clock_->now();
        drop_expired(now);
        if (window_tokens_ + tokens_needed <= capacity_) {
            const Grant grant{now, tokens_needed};
            window_.push_back(grant);
            window_tokens_ += tokens_needed;
            if (record_grants_) log_.push_back(grant);
            return;
        }
        // wait for the oldest grant to leave the window, then re-check
        const auto wake = window_.front().time + kWindow;
        lock.unlock();
        clock_->sleep_until(wake);
        lock.lock();
    }
}

std::vector<RateLimiter::Grant> RateLimiter::grant_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

}  // namespace policyprobe
