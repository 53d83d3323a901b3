#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hyperctl {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer; used to turn (seed, salt) pairs into stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the RNG stream owned by one controller dimension.
/// The additive form makes dimension i of a controller seeded with `master`
/// reproducible by a single-dimension controller seeded with
/// `master + kGoldenGamma * i`.
inline std::uint64_t dimension_stream_seed(std::uint64_t master, int dim) {
  return mix64(master + kGoldenGamma * static_cast<std::uint64_t>(dim));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  return mix64(master ^ mix64(salt));
}

/// Uniform integer in [0, n) via rejection sampling. Unlike
/// std::uniform_int_distribution, the draw sequence is identical across
/// standard library implementations.
inline int uniform_index(std::mt19937_64& gen, int n) {
  const auto bound = static_cast<std::uint64_t>(n);
  std::uint64_t overshoot = (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
  std::uint64_t threshold = std::uint64_t{0} - overshoot;  // 2^64 - overshoot
  std::uint64_t x = gen();
  while (overshoot != 0 && x >= threshold) x = gen();
  return static_cast<int>(x % bound);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Standard normal draw, Box-Muller without the cached second value so every
/// call consumes exactly two generator words.
inline double normal_sample(std::mt19937_64& gen) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 = static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform_real01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline std::string rng_state_string(const std::mt19937_64& gen) {
  std::ostringstream oss;
  oss << gen;
  return oss.str();
}

inline std::mt19937_64 rng_from_state_string(const std::string& state) {
  std::mt19937_64 gen;
  std::istringstream iss(state);
  iss >> gen;
  if (!iss) throw std::invalid_argument("malformed RNG state string");
  return gen;
}

}  // namespace hyperctl
