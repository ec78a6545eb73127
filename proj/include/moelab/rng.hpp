/*
 * rng.hpp
 *
 * Counter-based splitmix64 stream used for weight initialisation and seeded
 * test inputs. Every value is a pure function of (seed, stream id, counter),
 * so any single matrix entry can be regenerated without touching the rest:
 *
 *   mix(z)   = splitmix64 finaliser
 *              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *              z ^ (z >> 31)
 *   key      = mix(seed ^ mix(stream + GAMMA))
 *   bits(i)  = mix(key + (i + 1) * GAMMA)          GAMMA = 0x9E3779B97F4A7C15
 *   unit(i)  = (bits(i) >> 11) * 2^-53             in [0, 1)
 *
 * All arithmetic is modulo 2^64.
 */
#pragma once

#include <cstdint>

namespace moelab::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix(seed ^ mix(stream + kGamma));
}

constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix(key + (counter + 1) * kGamma);
}

constexpr double to_unit(std::uint64_t b) noexcept {
  return static_cast<double>(b >> 11) * 0x1.0p-53;
}

/// Uniform value in [-bound, bound) for entry `counter` of stream `stream`.
double uniform_symmetric(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                         double bound) noexcept;

/// Stream identifiers for every matrix of a layer.
namespace streams {
inline constexpr std::uint64_t kRouter = 1;
inline constexpr std::uint64_t kDown = 2;
inline constexpr std::uint64_t kUp = 3;
inline constexpr std::uint64_t kTokens = 4;
inline constexpr std::uint64_t kUpstreamGrad = 5;

inline constexpr std::uint64_t kFc1 = 0;
inline constexpr std::uint64_t kGate = 1;
inline constexpr std::uint64_t kFc2 = 2;

constexpr std::uint64_t routed(std::uint64_t expert, std::uint64_t which) noexcept {
  return 0x100ULL + 4 * expert + which;
}
constexpr std::uint64_t shared(std::uint64_t expert, std::uint64_t which) noexcept {
  return 0x100000000ULL + 4 * expert + which;
}
}  // namespace streams

}  // namespace moelab::rng
