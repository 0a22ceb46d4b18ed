#pragma once

#include <cstdint>
#include <limits>

namespace mov {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a sequence of tags
/// (epoch, batch, sample, network index...). Order of tags matters.
constexpr std::uint64_t derive_seed(std::uint64_t base) noexcept { return splitmix64(base); }

template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest) noexcept
{
    return derive_seed(splitmix64(base) ^ splitmix64(tag + 0x632BE59BD9B4E019ULL), static_cast<std::uint64_t>(rest)...);
}

/// Cheap counter-based generator for dropout masks, which are drawn once per
/// sample per network per step and would make an mt19937 reseed dominate.
class SplitMixStream {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMixStream(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

} // namespace mov
