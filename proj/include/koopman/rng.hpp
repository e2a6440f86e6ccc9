#pragma once

/// \file rng.hpp
/// SplitMix64 streams and a Box-Muller normal sampler. The standard library
/// distributions are implementation-defined, so sampling is spelled out here to
/// keep trajectories reproducible across platforms.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace koopman {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent seed for sub-stream `stream` of `seed` (trial index, noise source).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Stream identifiers separating the random sources of one simulation.
enum class Stream : std::uint64_t { process = 1, observation = 2, initial = 3 };

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}
    constexpr SplitMix64(std::uint64_t seed, Stream stream)
        : state_(derive_seed(seed, static_cast<std::uint64_t>(stream)))
    {}

    constexpr std::uint64_t next()
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform on (0, 1].
    double uniform() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform()));
        const double angle  = 2.0 * std::numbers::pi * uniform();
        spare_              = radius * std::sin(angle);
        has_spare_          = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    double spare_   = 0.0;
    bool has_spare_ = false;
};

} // namespace koopman
