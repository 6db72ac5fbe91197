#ifndef KNNAVG_RNG_HPP
#define KNNAVG_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace knnavg {

/// SplitMix64 finalizer. Used for seeding and for all seed derivation.
constexpr auto mix64(std::uint64_t z) -> std::uint64_t
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31U);
}

/// 64-bit FNV-1a, used to turn configuration keys into seed material.
constexpr auto fnv1a64(std::string_view text) -> std::uint64_t
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// xoshiro256** seeded through SplitMix64.
///
/// Every derived quantity is computed from the raw 64-bit output with fixed
/// arithmetic: uniforms take the top 53 bits, Gaussians use Box-Muller with
/// one normal per call (the sine branch is discarded). No std::*_distribution
/// is involved, so a seed produces the same stream with any standard library.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed)
    {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s += 0x9E3779B97F4A7C15ULL;
            word = mix64(s - 0x9E3779B97F4A7C15ULL);
        }
    }

    [[nodiscard]] auto seed() const -> std::uint64_t { return seed_; }

    auto next_u64() -> std::uint64_t
    {
        auto const result = rotl(state_[1] * 5, 7) * 9;
        auto const t = state_[1] << 17U;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    auto uniform01() -> double { return static_cast<double>(next_u64() >> 11U) * 0x1.0p-53; }

    auto uniform(double lo, double hi) -> double { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be positive.
    auto index(std::uint64_t n) -> std::uint64_t
    {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64U);
    }

    auto coin() -> bool { return (next_u64() >> 63U) != 0; }

    /// Standard normal draw. Consumes exactly two uniforms.
    auto normal() -> double
    {
        double const u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        double const u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    auto normal(double mean, double stddev) -> double { return mean + stddev * normal(); }

    /// Independent child stream; the parent state is not advanced.
    [[nodiscard]] auto split(std::uint64_t child_id) const -> RngStream
    {
        return RngStream(mix64(seed_ ^ mix64(child_id + 1)));
    }

    friend auto operator==(RngStream const&, RngStream const&) -> bool = default;

private:
    static constexpr auto rotl(std::uint64_t x, int k) -> std::uint64_t
    {
        return (x << static_cast<unsigned>(k)) | (x >> static_cast<unsigned>(64 - k));
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

} // namespace knnavg

#endif
