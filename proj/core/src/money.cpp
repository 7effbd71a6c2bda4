#include "policyprobe/money.hpp"

#include <cmath>
#include <cstdlib>

#include "policyprobe/errors.hpp"

namespace policyprobe {

Money Money::from_dollars(double dollars) {
    return Money(static_cast<std::int64_t>(std::llround(dollars * 1e6)));
}

Money Money::parse(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (const char c : text) {
        if (c == '$' || c == ',' || c == ' ') continue;
        cleaned.push_back(c);
    }
    if (cleaned.empty()) throw ConfigError("empty money literal");

    bool negative = false;
    std::size_t pos = 0;
    if (cleaned[0] == '-') {
        negative = true;
        pos = 1;
    }
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    std::int64_t frac_scale = 1'000'000;
    bool in_fraction = false;
    bool any_digit = false;
    for (; pos < cleaned.size(); ++pos) {
        const char c = cleaned[pos];
        if (c == '.') {
            if (in_fraction) throw ConfigError("bad money literal '" + std::string(text) + "'");
            in_fraction = true;
            continue;
        }
        if (c < '0' || c > '9') throw ConfigError("bad money literal '" + std::string(text) + "'");
        any_digit = true;
        if (!in_fraction) {
            whole = whole * 10 + (c - '0');
        } else if (frac_scale > 1) {
            frac_scale /= 10;
            frac += (c - '0') * frac_scale;
        }
    }
    if (!any_digit) throw ConfigError("bad money literal '" + std::string(text) + "'");
    const std::int64_t micro = whole * 1'000'000 + frac;
    return Money(negative ? -micro : micro);
}

std::string Money::decimal_string() const {
    const bool negative = micro_ < 0;
    std::uint64_t abs = negative ? static_cast<std::uint64_t>(-(micro_ + 1)) + 1
                                 : static_cast<std::uint64_t>(micro_);
    const std::uint64_t whole = abs / 1'000'000;
    std::uint64_t frac = abs % 1'000'000;

    std::string digits = std::to_string(frac);
    digits.insert(digits.begin(), 6 - digits.size(), '0');
    while (digits.size() > 2 && digits.back() == '0') digits.pop_back();

    std::string out = negative ? "-" : "";
    out += std::to_string(whole);
    out += '.';
    out += digits;
    return out;
}

std::string Money::display() const {
    std::string plain = decimal_string();
    const bool negative = !plain.empty() && plain[0] == '-';
    if (negative) plain.erase(plain.begin());

    const std::size_t dot = plain.find('.');
    std::string whole = plain.substr(0, dot);
    const std::string rest = plain.substr(dot);

    std::string grouped;
    for (std::size_t i = 0; i < whole.size(); ++i) {
        if (i > 0 && (whole.size() - i) % 3 == 0) grouped.push_back(',');
        grouped.push_back(whole[i]);
    }
    return (negative ? "-$" : "$") + grouped + rest;
}

Money Money::scaled(double factor) const {
    return Money(static_cast<std::int64_t>(std::llround(static_cast<double>(micro_) * factor)));
}

}  // namespace policyprobe
