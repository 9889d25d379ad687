#pragma once

// Portable hashing and pseudo-random streams. Everything that feeds a log,
// a split, or a sample goes through these so results do not depend on the
// standard library's distribution implementations.

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>

namespace counterpart {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class StableHasher {
public:
    explicit constexpr StableHasher(std::uint64_t seed = 0x243f6a8885a308d3ULL) noexcept
        : state_(mix64(seed)) {}

    constexpr StableHasher& add(std::uint64_t v) noexcept {
        state_ = mix64(state_ ^ mix64(v + 0x632be59bd9b4e019ULL));
        return *this;
    }
    constexpr StableHasher& add(std::string_view s) noexcept {
        add(static_cast<std::uint64_t>(s.size()));
        return add(fnv1a(s));
    }
    StableHasher& add(double v) noexcept {
        if (v != v) return add(std::uint64_t{0x7ff8000000000000ULL});  // one NaN
        if (v == 0.0) v = 0.0;                                            // fold -0
        return add(std::bit_cast<std::uint64_t>(v));
    }

    template <typename T>
        requires(std::is_integral_v<T> || std::is_enum_v<T>)
    constexpr StableHasher& add(T v) noexcept {
        return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
    }

    constexpr std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// Order-sensitive 64-bit hash of heterogeneous parts, stable across runs and platforms.
template <typename... Parts>
std::uint64_t stable_hash(const Parts&... parts) {
    StableHasher h;
    if constexpr (sizeof...(parts) > 0) {
        (h.add(parts), ...);
    }
    return h.value();
}

/// SplitMix64 stream.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

    template <typename T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace counterpart
