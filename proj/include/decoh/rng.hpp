#pragma once

#include <cstdint>
#include <numbers>

namespace decoh {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

/// Seed of stream `index` under `master`:
///     derive_seed(m, u) = mix64(m ^ mix64(u + golden_gamma))
/// Used for ensemble members, sweep cells and recurrence samples.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master ^ mix64(index + golden_gamma));
}

/// Counter-based generator: the k-th output (k = 1, 2, ...) is
///     mix64(seed + k * golden_gamma)
/// which is exactly SplitMix64. Doubles take the top 53 bits, so a stream is
/// reproducible bit-for-bit by any implementation of the two formulas above.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    constexpr std::uint64_t next() noexcept {
        ++counter_;
        return mix64(seed_ + counter_ * golden_gamma);
    }

    /// Uniform on [0, 1).
    constexpr double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    constexpr double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform();
    }

    constexpr double phase() noexcept { return 2.0 * std::numbers::pi * uniform(); }

    constexpr std::uint64_t seed() const noexcept { return seed_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    // UniformRandomBitGenerator surface, for std::shuffle and friends.
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    constexpr result_type operator()() noexcept { return next(); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace decoh
