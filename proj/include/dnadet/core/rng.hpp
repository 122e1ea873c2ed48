#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dnadet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a; stable across platforms, used for stream names and config hashes.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the named sub-stream `name` under `seed` (e.g. "data", "init", "patches").
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ splitmix64(fnv1a(name)));
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return splitmix64(stream_seed(seed, name) + splitmix64(index + 1));
}

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
  return Rng(stream_seed(seed, name));
}

inline Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return Rng(stream_seed(seed, name, index));
}

/// Uniform in [0,1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi]; unbiased via rejection.
inline long long uniform_int(Rng& rng, long long lo, long long hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<long long>(rng());
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return lo + static_cast<long long>(r % span);
}

/// Standard normal via Box-Muller; platform-stable unlike std::normal_distribution.
inline double normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Normal(0, std) truncated to [-2 std, 2 std] by resampling.
inline double truncated_normal(Rng& rng, double std) {
  for (;;) {
    const double v = normal(rng);
    if (v >= -2.0 && v <= 2.0) return v * std;
  }
}

/// Fisher-Yates with the platform-stable integer draw.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = uniform_int(rng, 0, i);
    std::swap(first[i], first[j]);
  }
}

}  // namespace dnadet
