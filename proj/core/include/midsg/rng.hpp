#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace midsg {

using Rng = std::mt19937_64;

// Decorrelated 64-bit seed for stream `stream` of a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// Textual engine state, round-trips exactly through restore_rng().
std::string save_rng(const Rng& rng);
Rng restore_rng(const std::string& state);

// Standard normal draws via Box-Muller on the engine's raw output, so the
// sequence depends only on the engine (not on library distribution code).
double standard_normal(Rng& rng);
void fill_normal(Rng& rng, std::vector<double>& out, double stddev = 1.0);
double uniform01(Rng& rng);
int uniform_int(Rng& rng, int lo, int hi);  // inclusive

// FNV-1a over raw bytes; used for checksums of parameters and files.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 1469598103934665603ULL);

}  // namespace midsg
