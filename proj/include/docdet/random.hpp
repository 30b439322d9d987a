#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace docdet {

using Rng = std::mt19937_64;

/// Reproducible generator for a named sub-stream of a user seed, so each
/// feature draws from its own sequence.
Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

/// Uniform integer in [0, n). Implemented here rather than with
/// std::uniform_int_distribution, whose output differs between standard
/// libraries.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform double in [0, 1).
double uniform01(Rng& rng);

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace docdet
