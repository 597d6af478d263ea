#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace trimcp {

using Rng = std::mt19937_64;

// One step of the splitmix64 generator; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

// Derives a child seed from a parent seed and a path of integer labels.
// Distinct paths give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

// Fixed labels for the independent streams used by the harness.
namespace stream {
inline constexpr std::uint64_t auxiliary = 0x61757821ULL;
inline constexpr std::uint64_t replication = 0x72657073ULL;
inline constexpr std::uint64_t diagnostic = 0x64696167ULL;
inline constexpr std::uint64_t audit = 0x61756469ULL;
inline constexpr std::uint64_t profile = 0x70726f66ULL;
inline constexpr std::uint64_t quadrature = 0x71756164ULL;
}  // namespace stream

Rng make_rng(std::uint64_t seed);

// Uniform draw on [0,1) with 53 random bits.
double uniform01(Rng& rng);

// Standard normal draw (inverse-CDF method, one uniform per draw so that
// streams stay aligned across scenes that share a seed).
double standard_normal(Rng& rng);

}  // namespace trimcp
