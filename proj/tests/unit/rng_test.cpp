#include <gtest/gtest.h>

#include <set>

#include "toolfault/hashing.hpp"
#include "toolfault/rng.hpp"

using namespace toolfault;

TEST(Rng, MixSeedMatchesStatedFormula) {
  // splitmix64 reference constants, written out independently.
  const auto sm = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  for (std::uint64_t p : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    for (std::uint64_t i = 0; i < 50; ++i) {
      EXPECT_EQ(mix_seed(p, i), sm(p ^ sm(i + 0x9e3779b97f4a7c15ULL)));
    }
  }
  // Known splitmix64 output for state 0.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UnitAndKeyedUnitInHalfOpenInterval) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double k = keyed_unit(static_cast<std::uint64_t>(i), 17);
    EXPECT_GE(k, 0.0);
    EXPECT_LT(k, 1.0);
  }
  EXPECT_EQ(keyed_unit(1, 2), keyed_unit(1, 2));
}

TEST(Hashing, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
