#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace negsamp {

/// Deterministic random streams. Every stream in the library is derived from a
/// single master seed via derive_seed(seed, tag, index...), so a run is fully
/// reproducible from one integer. Draw primitives avoid std::*_distribution to
/// keep streams identical across standard-library implementations.
namespace rng {

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed split scheme: master seed -> named stream -> optional indices.
/// derive_seed(s, "data") and derive_seed(s, "train", run_id) never collide
/// for distinct tags/indices in practice (splitmix64 mixing).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t index) {
  return splitmix64(derive_seed(seed, tag) + 0x632be59bd9b4e019ull * (index + 1));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t i, std::uint64_t j) {
  return derive_seed(derive_seed(seed, tag, i), tag, j + 1);
}

}  // namespace rng

/// mt19937_64 wrapper with hand-rolled conversions (uniform01, bounded index,
/// gaussian) so draws are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire multiply-shift with rejection (unbiased).
  std::uint32_t uniform_index(std::uint32_t n) {
    std::uint32_t x = static_cast<std::uint32_t>(engine_());
    std::uint64_t m = static_cast<std::uint64_t>(x) * n;
    auto lo = static_cast<std::uint32_t>(m);
    if (lo < n) {
      std::uint32_t threshold = (0u - n) % n;
      while (lo < threshold) {
        x = static_cast<std::uint32_t>(engine_());
        m = static_cast<std::uint64_t>(x) * n;
        lo = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  /// Standard normal via Box-Muller; one value per two uniforms.
  double gaussian() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace negsamp
