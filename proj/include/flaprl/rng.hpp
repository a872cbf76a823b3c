#pragma once

#include <cstdint>

namespace flaprl {

/// splitmix64 finalizer. Used to expand user seeds and derive sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix64(mix64(base) ^ (stream * 0xD1B54A32D192ED03ull + 1));
}

/// xorshift64* generator.
///
/// State update: x ^= x >> 12; x ^= x << 25; x ^= x >> 27.
/// Output: x * 0x2545F4914F6CDD1D.
/// Seeding: state = mix64(seed), replaced by a fixed constant if that is zero.
/// Reals use the top 53 bits; bounded integers use Lemire's multiply-shift
/// with rejection, so every derived stream is reproducible in any language.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed = 0) noexcept : state_(mix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
    }

    constexpr std::uint64_t next_u64() noexcept {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1Dull;
    }

    /// Uniform in [0, 1).
    constexpr double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). bound must be nonzero.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        auto product = static_cast<unsigned __int128>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(product);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                product = static_cast<unsigned __int128>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(product);
            }
        }
        return static_cast<std::uint64_t>(product >> 64);
    }

    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    constexpr std::uint64_t state() const noexcept { return state_; }

    friend constexpr bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_;
};

}  // namespace flaprl
