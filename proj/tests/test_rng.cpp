#include <cmath>
#include <set>

#include "ashdp/rng.hpp"
#include "doctest.h"

using ashdp::Rng;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams are independent of parent consumption") {
  Rng parent(7);
  Rng child_before = parent.substream("shuffler");
  parent.next_u64();
  parent.next_u64();
  Rng child_after = Rng(7).substream("shuffler");
  for (int i = 0; i < 100; ++i) CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("named substreams differ") {
  Rng parent(7);
  CHECK(parent.substream("user").next_u64() != parent.substream("shuffler").next_u64());
  CHECK(parent.substream("t", 0).next_u64() != parent.substream("t", 1).next_u64());
}

TEST_CASE("uniform_u64 respects bounds and is roughly uniform") {
  Rng rng(1);
  int counts[10] = {0};
  for (int i = 0; i < 100000; ++i) {
    uint64_t v = rng.uniform_u64(10);
    REQUIRE(v < 10);
    counts[v] += 1;
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);  // ~4 sigma
}

TEST_CASE("bernoulli mean") {
  Rng rng(3);
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += rng.bernoulli(0.3);
  CHECK(std::abs(hits / 100000.0 - 0.3) < 0.006);
}

TEST_CASE("geometric failure counts match the closed form") {
  Rng rng(5);
  double decay = 0.6;
  int64_t zeros = 0, total = 200000;
  double mean = 0.0;
  for (int64_t i = 0; i < total; ++i) {
    int64_t g = rng.geometric_failures(decay);
    REQUIRE(g >= 0);
    zeros += g == 0;
    mean += static_cast<double>(g);
  }
  mean /= static_cast<double>(total);
  CHECK(std::abs(zeros / static_cast<double>(total) - (1.0 - decay)) < 0.005);
  CHECK(std::abs(mean - decay / (1.0 - decay)) < 0.02);
}

TEST_CASE("permutation is a bijection") {
  Rng rng(9);
  auto p = rng.permutation(257);
  std::set<uint32_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 257);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 256);
}
