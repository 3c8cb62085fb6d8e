#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "sshdi/errors.hpp"

namespace sshdi {

namespace detail {

/// SplitMix64 finalizer; used both for seeding and for deriving child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// Derive an independent child seed from (seed, key). Used by the Monte
/// Carlo harness to give each replicate its own seed space without
/// colliding with the per-resample stream indices.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return detail::mix64(detail::mix64(seed) ^ detail::mix64(key ^ 0xA5A5A5A5A5A5A5A5ULL));
}

/// Counter-seeded xoshiro256++ stream.
///
/// Stream b is fully determined by (master_seed, stream_index): the state is
/// expanded from a SplitMix64 hash of the pair, so any stream can be
/// constructed directly without sequentially advancing a shared generator.
/// Two streams with the same parameters produce bit-identical sequences.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed), stream_index_(stream_index) {
    std::uint64_t x = detail::mix64(master_seed) ^ detail::mix64(stream_index);
    for (auto& w : s_) {
      x += 0x9E3779B97F4A7C15ULL;
      w = detail::mix64(x);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, bound) via rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw Error("RngStream::below: bound must be positive");
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal draw (Box-Muller, second value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sshdi
