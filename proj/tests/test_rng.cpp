#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "proadapt/rng.hpp"

using namespace proadapt;

TEST_CASE("splitmix64 matches the reference sequence") {
  // Vigna's reference implementation started at state 0 yields these.
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("fnv1a64 chains like concatenation") {
  CHECK(fnv1a64("=red", fnv1a64("color")) == fnv1a64("color=red"));
}

TEST_CASE("derive_seed separates labels and indices") {
  CHECK(derive_seed(7, "split", 0) == derive_seed(7, "split", 0));
  CHECK(derive_seed(7, "split", 0) != derive_seed(7, "split", 1));
  CHECK(derive_seed(7, "split", 0) != derive_seed(7, "train", 0));
  CHECK(derive_seed(7, "split", 0) != derive_seed(8, "split", 0));
}

TEST_CASE("Rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t x = a.next_u64();
    all_equal = all_equal && x == b.next_u64();
    any_diff = any_diff || x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform01 stays in [0,1) and is roughly uniform") {
  Rng rng(1);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::fabs(sum / n - 0.5) < 0.01);
}

TEST_CASE("below is unbiased across residues") {
  Rng rng(2);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t v = rng.below(10);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (const int c : counts) CHECK(std::abs(c - n / 10) < 500);
}

TEST_CASE("normal has unit moments") {
  Rng rng(3);
  const int n = 40000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("shuffle permutes and is seed-stable") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(9), b(9);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  CHECK(v != std::vector<int>(v.size(), 0));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}
