#pragma once

#include <array>
#include <cstdint>

#include "swed/matrix.hpp"

namespace swed {

/// xoshiro256++ generator seeded through splitmix64.
///
/// Every random draw in the library flows through this generator so that a
/// 64-bit seed reproduces corpora, restarts, and candidate streams bit for
/// bit on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();

    /// Standard normal via Box-Muller; pairs are cached.
    double gaussian();

    Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

    /// Independent child seed for substream `index` (restart, candidate, ...).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

private:
    std::array<std::uint64_t, 4> state_{};
    double cached_gaussian_ = 0.0;
    bool has_cached_ = false;
};

} // namespace swed
