#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string>

namespace counterpart {

/// Exact currency amount with two fractional digits, stored as integer cents.
class Money {
public:
    constexpr Money() = default;

    static constexpr Money from_cents(std::int64_t cents) noexcept { return Money(cents); }

    /// Rounds half away from zero to the nearest cent.
    static Money from_units(double units) noexcept {
        return Money(static_cast<std::int64_t>(std::llround(units * 100.0)));
    }

    static constexpr Money whole(std::int64_t units) noexcept { return Money(units * 100); }

    constexpr std::int64_t cents() const noexcept { return cents_; }
    constexpr double units() const noexcept { return static_cast<double>(cents_) / 100.0; }
    constexpr bool is_whole() const noexcept { return cents_ % 100 == 0; }

    constexpr Money operator+(Money o) const noexcept { return Money(cents_ + o.cents_); }
    constexpr Money operator-(Money o) const noexcept { return Money(cents_ - o.cents_); }
    constexpr Money operator-() const noexcept { return Money(-cents_); }
    constexpr Money& operator+=(Money o) noexcept {
        cents_ += o.cents_;
        return *this;
    }

    /// Product with a real factor, rounded to the nearest cent.
    Money scaled(double factor) const noexcept {
        return Money(static_cast<std::int64_t>(std::llround(static_cast<double>(cents_) * factor)));
    }

    constexpr auto operator<=>(const Money&) const = default;

    /// "6000" for whole amounts, "48.60" otherwise.
    std::string to_string() const {
        const std::int64_t a = cents_ < 0 ? -cents_ : cents_;
        std::string s = cents_ < 0 ? "-" : "";
        s += std::to_string(a / 100);
        if (a % 100 != 0) {
            const auto frac = a % 100;
            s += '.';
            s += static_cast<char>('0' + frac / 10);
            s += static_cast<char>('0' + frac % 10);
        }
        return s;
    }

private:
    constexpr explicit Money(std::int64_t cents) noexcept : cents_(cents) {}
    std::int64_t cents_ = 0;
};

/// Two amounts agree to within one minimal currency unit.
constexpr bool within_one_unit(Money a, Money b) noexcept {
    const auto d = a.cents() - b.cents();
    return d >= -1 && d <= 1;
}

}  // namespace counterpart
