#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace iclsel {

// std::mt19937_64 is fully specified by the standard but the std
// distributions are not, so every draw that affects an artifact goes through
// these helpers to stay identical across standard libraries.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed derived from a base seed and a stream index (per-resample, per-query).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

// Uniform double in [0, 1).
double uniform_unit(Rng& rng);

double standard_normal(Rng& rng);

// First `count` elements of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    std::uint64_t seed);

}  // namespace iclsel
