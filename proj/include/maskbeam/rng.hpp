#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace maskbeam {

/// Philox4x32-10 counter-based generator.
///
/// Stateless core: each 128-bit counter block maps to 128 output bits under a
/// 64-bit key, so draws are reproducible for any evaluation order.  The
/// wrapper below threads (seed, stream, block) explicitly; parallel workers
/// get independent streams via substream() instead of sharing mutable state.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  struct Block {
    std::uint32_t x[4];
  };

  static Block encrypt(Block ctr, std::uint32_t k0, std::uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
      if (round != 0) {
        k0 += kWeyl0;
        k1 += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr.x[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr.x[2];
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32);
      const std::uint32_t lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32);
      const std::uint32_t lo1 = std::uint32_t(p1);
      Block next;
      next.x[0] = hi1 ^ ctr.x[1] ^ k0;
      next.x[1] = lo1;
      next.x[2] = hi0 ^ ctr.x[3] ^ k1;
      next.x[3] = lo0;
      ctr = next;
    }
    return ctr;
  }
};

/// Buffered stream view over the Philox core.
///
/// Counter layout: x[0..1] = 64-bit block index, x[2..3] = 64-bit stream id.
/// The key is the user seed.  substream(i) derives a child whose stream id
/// mixes the parent's, so nested forks (per user, per realization, per draw)
/// never collide for fewer than 2^64 children per level.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  Rng substream(std::uint64_t child) const {
    // splitmix64 step decorrelates sibling ids.
    std::uint64_t z = stream_ + 0x9E3779B97F4A7C15ull + child;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(seed_, z ^ (z >> 31));
  }

  std::uint32_t next_u32() {
    if (have_ == 0) refill();
    return buf_.x[4 - have_--];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; second variate is cached.
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return cached_normal_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

  /// Circularly symmetric complex normal with unit variance (E|z|^2 = 1).
  std::complex<double> cnormal() {
    const double re = normal();
    const double im = normal();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill() {
    Philox4x32::Block ctr;
    ctr.x[0] = std::uint32_t(block_);
    ctr.x[1] = std::uint32_t(block_ >> 32);
    ctr.x[2] = std::uint32_t(stream_);
    ctr.x[3] = std::uint32_t(stream_ >> 32);
    buf_ = Philox4x32::encrypt(ctr, std::uint32_t(seed_),
                               std::uint32_t(seed_ >> 32));
    ++block_;
    have_ = 4;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Block buf_{};
  int have_ = 0;
  double cached_normal_ = 0.0;
  bool have_normal_ = false;
};

}  // namespace maskbeam
