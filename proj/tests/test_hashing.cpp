#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ashdp/hashing.hpp"
#include "doctest.h"

using namespace ashdp;
using namespace ashdp::hashing;

namespace {

// Trial-division oracle.
bool slow_prime(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t i = 2; i * i <= n; ++i)
    if (n % i == 0) return false;
  return true;
}

std::vector<int64_t> brute_preimages(const UniversalHash& h, int64_t v) {
  std::vector<int64_t> out;
  for (int64_t x = 1; x <= h.d; ++x)
    if (h.hash(x) == v) out.push_back(x);
  return out;
}

}  // namespace

TEST_CASE("miller-rabin agrees with trial division") {
  for (uint64_t n = 0; n < 5000; ++n) CHECK(is_prime(n) == slow_prime(n));
  CHECK(is_prime(2147483647ULL));           // 2^31 - 1
  CHECK_FALSE(is_prime(2147483647ULL * 3));
}

TEST_CASE("next_prime_at_least") {
  CHECK(next_prime_at_least(8) == 11);  // 8, 9, 10 composite
  CHECK(next_prime_at_least(2) == 2);
  CHECK(next_prime_at_least(97) == 97);
  for (uint64_t d : {5ULL, 30ULL, 1000ULL, 123457ULL, 1000000000ULL}) {
    uint64_t p = next_prime_at_least(d);
    CHECK(is_prime(p));
    CHECK(p >= d);
    CHECK(p < 2 * d);
  }
}

TEST_CASE("hash formula") {
  UniversalHash h{11, 1, 0, 4, 8};
  CHECK(h.hash(5) == 2);  // 5 mod 4 = 1, one-based 2
  CHECK_THROWS(h.hash(0));
  CHECK_THROWS(h.hash(9));
}

TEST_CASE("identity-style parameters reduce to x mod b") {
  UniversalHash h{11, 1, 0, 8, 8};
  std::set<int64_t> values;
  for (int64_t x = 1; x <= 8; ++x) {
    CHECK(h.hash(x) == (x % 11) % 8 + 1);
    values.insert(h.hash(x));
  }
  CHECK(values.size() == 8);  // bijection-like on [d]
}

TEST_CASE("preimages of the worked example") {
  UniversalHash h{11, 1, 0, 4, 8};
  // Zero-based residue 1 (one-based v = 2): y in {1, 5, 9}, x = y, 9 > d dropped.
  CHECK(h.preimages(2) == std::vector<int64_t>{1, 5});
}

TEST_CASE("preimage consistency against brute force") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    int64_t d = 2 + static_cast<int64_t>(rng.uniform_u64(998));
    int64_t b = 1 + static_cast<int64_t>(rng.uniform_u64(static_cast<uint64_t>(d)));
    UniversalHash h = sample_hash(d, b, rng);
    std::vector<int64_t> all;
    for (int64_t v = 1; v <= b; ++v) {
      auto pre = h.preimages(v);
      CHECK(pre == brute_preimages(h, v));
      for (int64_t x : pre) CHECK(h.hash(x) == v);
      all.insert(all.end(), pre.begin(), pre.end());
      CHECK(h.preimage_scan_cost() <= 2 * d / b + 1);
    }
    // Disjoint union over v covers [d] exactly.
    std::sort(all.begin(), all.end());
    REQUIRE(static_cast<int64_t>(all.size()) == d);
    for (int64_t x = 1; x <= d; ++x) CHECK(all[static_cast<size_t>(x - 1)] == x);
  }
}

TEST_CASE("b = d with minimal prime gives at most two preimages per value") {
  Rng rng(5);
  for (int64_t d : {8, 13, 50, 97}) {
    UniversalHash h = sample_hash(d, d, rng);
    for (int64_t v = 1; v <= d; ++v) CHECK(h.preimages(v).size() <= 2);
  }
}

TEST_CASE("sampled hash is deterministic under a fixed seed") {
  Rng r1(123), r2(123);
  UniversalHash a = sample_hash(1000, 37, r1);
  UniversalHash b = sample_hash(1000, 37, r2);
  CHECK(a.a1 == b.a1);
  CHECK(a.a0 == b.a0);
  CHECK(a.p == b.p);
}

TEST_CASE("pair collision rate of the affine family") {
  // d = 97 forces p = 97; the family is almost 2-wise independent: the exact
  // collision probability over all (a1, a0) is sum_k s_k (s_k - 1) / (p(p-1))
  // for bucket sizes s_k of y mod b, slightly below 1/b.
  const int64_t d = 97, b = 10;
  const uint64_t p = next_prime_at_least(static_cast<uint64_t>(d));
  REQUIRE(p == 97);
  std::map<uint64_t, int64_t> bucket_sizes;
  for (uint64_t y = 0; y < p; ++y) bucket_sizes[y % static_cast<uint64_t>(b)] += 1;
  double exact = 0.0;
  for (auto& [k, s] : bucket_sizes)
    exact += static_cast<double>(s) * static_cast<double>(s - 1);
  exact /= static_cast<double>(p) * static_cast<double>(p - 1);
  // Deviation from the ideal 1/b is O(1/p).
  CHECK(std::abs(exact - 1.0 / b) <= 1.0 / static_cast<double>(p));

  Rng rng(404);
  const int64_t draws = 100000;
  int64_t collisions = 0;
  for (int64_t i = 0; i < draws; ++i) {
    UniversalHash h = sample_hash(d, b, rng);
    if (h.hash(13) == h.hash(58)) ++collisions;
  }
  double rate = static_cast<double>(collisions) / static_cast<double>(draws);
  double se = std::sqrt(exact * (1 - exact) / static_cast<double>(draws));
  CHECK(std::abs(rate - exact) <= 3 * se);
}

TEST_CASE("table hash and random oracle hash") {
  TableHash t({2, 1, 2, 3, 2, 4, 2, 1}, 4);
  CHECK(t.hash(2) == 1);
  CHECK(t.hash(8) == 1);
  CHECK(t.hash(4) == 3);
  CHECK(t.preimages(1, 8) == std::vector<int64_t>{2, 8});
  CHECK(t.preimages(1, 5) == std::vector<int64_t>{2});

  RandomOracleHash o(9, 1000, 16);
  std::vector<int64_t> counts(16, 0);
  for (int64_t x = 1; x <= 1000; ++x) {
    int64_t v = o.hash(x);
    REQUIRE(v >= 1);
    REQUIRE(v <= 16);
    CHECK(o.hash(x) == v);  // stateless
    counts[static_cast<size_t>(v - 1)] += 1;
  }
  auto pre = o.preimages(3, 1000);
  for (int64_t x : pre) CHECK(o.hash(x) == 3);
  CHECK(static_cast<int64_t>(pre.size()) == counts[2]);
}
