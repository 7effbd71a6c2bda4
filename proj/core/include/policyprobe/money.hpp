#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace policyprobe {

// Currency as an exact decimal in integer micro-units (1 USD = 1,000,000).
// Cost acceptance checks compare these as integers, never as floats.
class Money {
public:
    constexpr Money() = default;

    static constexpr Money from_micro(std::int64_t micro) { return Money(micro); }
    static Money from_dollars(double dollars);  // rounds half away from zero
    // Accepts "0.01", "$5,601", "5,600.00".
    static Money parse(std::string_view text);

    constexpr std::int64_t micro() const { return micro_; }
    double dollars() const { return static_cast<double>(micro_) / 1e6; }

    // "5600.00", "0.08452": at least two decimals, trailing zeros beyond
    // that trimmed. Stable across platforms (pure integer formatting).
    std::string decimal_string() const;
    // "$5,600.00" for human-facing summaries
    std::string display() const;

    Money scaled(long long count) const { return Money(micro_ * count); }
    Money scaled(double factor) const;

    friend constexpr Money operator+(Money a, Money b) { return Money(a.micro_ + b.micro_); }
    friend constexpr Money operator-(Money a, Money b) { return Money(a.micro_ - b.micro_); }
    friend constexpr auto operator<=>(Money a, Money b) = default;

private:
    constexpr explicit Money(std::int64_t micro) : micro_(micro) {}

    std::int64_t micro_ = 0;
};

}  // namespace policyprobe
