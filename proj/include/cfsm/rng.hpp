#ifndef CFSM_RNG_HPP
#define CFSM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "cfsm/errors.hpp"

namespace cfsm {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of sub-stream `stream_id` under `root`: splitmix64(root ^ splitmix64(stream_id)).
/// Stage i of a run draws from derive_seed(run_seed, i), so any stage can be
/// replayed without replaying the ones before it.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream_id) noexcept {
  return splitmix64(root ^ splitmix64(stream_id));
}

/// Portable generator: std::mt19937_64 (its output sequence is fixed by the
/// standard) with integer-exact index sampling. std::uniform_int_distribution
/// is deliberately not used since its algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [lo, hi], by rejection on the raw 64-bit output.
  std::size_t uniform_index(std::size_t lo, std::size_t hi) {
    if (hi < lo) throw InvalidInput("uniform_index: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::size_t>(next());  // full 2^64 range
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t draw = next();
    while (draw >= limit) draw = next();
    return lo + static_cast<std::size_t>(draw % span);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cfsm

#endif  // CFSM_RNG_HPP
