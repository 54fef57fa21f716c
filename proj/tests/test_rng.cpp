#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "coldmri/rng.hpp"

using coldmri::Rng;

TEST_CASE("raw engine output is the standardised mt19937_64 sequence") {
  // First output for the default seed, pinned by the standard.
  Rng rng(5489u);
  CHECK(rng.next_u64() == 14514284786278117030ull);
}

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("next_below stays in range and covers small ranges") {
  Rng rng(7);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = rng.next_below(5);
    REQUIRE(v < 5);
    ++hits[static_cast<std::size_t>(v)];
  }
  for (int h : hits) CHECK(h > 800);  // ~1000 expected per bucket
  CHECK(rng.next_below(1) == 0);
}

TEST_CASE("uniform01 lies in [0, 1)") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(11);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle produces a permutation and depends on the seed") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(1);
  a.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == w);
  CHECK(v != w);  // astronomically unlikely to be identity

  std::vector<int> v2(100);
  std::iota(v2.begin(), v2.end(), 0);
  Rng b(1);
  b.shuffle(std::span<int>(v2));
  CHECK(v == v2);

  std::vector<int> v3(100);
  std::iota(v3.begin(), v3.end(), 0);
  Rng c(2);
  c.shuffle(std::span<int>(v3));
  CHECK(v != v3);
}
