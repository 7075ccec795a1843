#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "maskbeam/rng.hpp"

using namespace maskbeam;

// Published known-answer vectors for the 10-round philox4x32 block cipher.
TEST_CASE("philox known answers") {
  {
    Philox4x32::Block ctr{{0u, 0u, 0u, 0u}};
    const auto out = Philox4x32::encrypt(ctr, 0u, 0u);
    CHECK(out.x[0] == 0x6627e8d5u);
    CHECK(out.x[1] == 0xe169c58du);
    CHECK(out.x[2] == 0xbc57ac4cu);
    CHECK(out.x[3] == 0x9b00dbd8u);
  }
  {
    Philox4x32::Block ctr{
        {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}};
    const auto out = Philox4x32::encrypt(ctr, 0xffffffffu, 0xffffffffu);
    CHECK(out.x[0] == 0x408f276du);
    CHECK(out.x[1] == 0x41c83b0eu);
    CHECK(out.x[2] == 0xa20bc7c6u);
    CHECK(out.x[3] == 0x6d5451fdu);
  }
  {
    Philox4x32::Block ctr{
        {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}};
    const auto out = Philox4x32::encrypt(ctr, 0xa4093822u, 0x299f31d0u);
    CHECK(out.x[0] == 0xd16cfe09u);
    CHECK(out.x[1] == 0x94fdccebu);
    CHECK(out.x[2] == 0x5001e420u);
    CHECK(out.x[3] == 0x24126ea1u);
  }
}

TEST_CASE("stream wrapper draws blocks in word order") {
  Rng rng(0, 0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("identical seeds replay identical sequences") {
  Rng a(1234, 7);
  Rng b(1234, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(1234, 8);
  Rng d(1235, 7);
  bool all_equal_c = true;
  bool all_equal_d = true;
  Rng a2(1234, 7);
  for (int i = 0; i < 16; ++i) {
    const auto ref = a2.next_u64();
    all_equal_c = all_equal_c && (c.next_u64() == ref);
    all_equal_d = all_equal_d && (d.next_u64() == ref);
  }
  CHECK_FALSE(all_equal_c);
  CHECK_FALSE(all_equal_d);
}

TEST_CASE("substreams are deterministic and collision free") {
  const Rng root(42, 0);
  // Same child id twice gives the same stream.
  CHECK(root.substream(5).stream() == root.substream(5).stream());

  // Sibling ids map to distinct streams, as do nested forks.
  std::set<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < 512; ++i)
    ids.insert(root.substream(i).stream());
  CHECK(ids.size() == 512);

  std::set<std::uint64_t> nested;
  for (std::uint64_t i = 0; i < 16; ++i)
    for (std::uint64_t j = 0; j < 16; ++j)
      nested.insert(root.substream(i).substream(j).stream());
  CHECK(nested.size() == 256);

  // Forking is const: the parent's own draw sequence is unaffected.
  Rng p1(42, 0);
  Rng p2(42, 0);
  (void)p2.substream(3);
  CHECK(p1.next_u64() == p2.next_u64());
}

TEST_CASE("uniform lands in [0,1) with flat moments") {
  Rng rng(99, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.005);
  CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("normal and cnormal match their first moments") {
  Rng rng(7, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);

  double esq = 0.0;
  std::complex<double> mean(0.0, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto z = rng.cnormal();
    esq += std::norm(z);
    mean += z;
  }
  CHECK(std::abs(esq / n - 1.0) < 0.02);
  CHECK(std::abs(mean) / n < 0.01);
}

TEST_CASE("next_u64 composes two draws little end first") {
  Rng a(0, 0);
  Rng b(0, 0);
  const std::uint64_t lo = a.next_u32();
  const std::uint64_t hi = a.next_u32();
  CHECK(b.next_u64() == ((hi << 32) | lo));
}
