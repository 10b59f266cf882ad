#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ashdp/rng.hpp"

namespace ashdp::hashing {

bool is_prime(uint64_t n);
// Smallest prime >= n. For n >= 2 it lies in [n, 2n) (Bertrand).
uint64_t next_prime_at_least(uint64_t n);

// h(x) = ((a1*x + a0) mod p) mod b, exposed 1-based on both sides:
// x in [1, d], value in [1, b]. Internally the residues are 0-based.
struct UniversalHash {
  uint64_t p = 0;   // prime in [d, 2d)
  uint64_t a1 = 0;  // in [1, p-1]
  uint64_t a0 = 0;  // in [0, p-1]
  int64_t b = 0;    // range, b <= d
  int64_t d = 0;    // domain

  int64_t hash(int64_t x) const;
  // All x in [1, d] with hash(x) == v, sorted. Enumerates the ceil(p/b)
  // residues y with y = v-1 (mod b) and maps them through a1^-1.
  std::vector<int64_t> preimages(int64_t v) const;
  // Number of y-candidates the preimage scan visits; <= 2d/b + 1.
  int64_t preimage_scan_cost() const;
};

UniversalHash sample_hash(int64_t d, int64_t b, Rng& rng);

// Protocol-facing hash abstraction so scripted replays can inject explicit
// tables and estimator checks can use an idealized uniform hash.
class HashFn {
 public:
  virtual ~HashFn() = default;
  virtual int64_t domain() const = 0;
  virtual int64_t range() const = 0;
  virtual int64_t hash(int64_t x) const = 0;
  // Preimages restricted to [1, item_limit] (the genuine item domain; a KV
  // run hashes padding keys above it but never selects them).
  virtual std::vector<int64_t> preimages(int64_t v, int64_t item_limit) const = 0;
};

class AffineHash final : public HashFn {
 public:
  explicit AffineHash(UniversalHash h) : h_(h) {}
  int64_t domain() const override { return h_.d; }
  int64_t range() const override { return h_.b; }
  int64_t hash(int64_t x) const override { return h_.hash(x); }
  std::vector<int64_t> preimages(int64_t v, int64_t item_limit) const override;
  const UniversalHash& params() const { return h_; }

 private:
  UniversalHash h_;
};

// Explicit table over [1, d]; used by injected-randomness replays.
class TableHash final : public HashFn {
 public:
  TableHash(std::vector<int64_t> table, int64_t b);
  int64_t domain() const override { return static_cast<int64_t>(table_.size()); }
  int64_t range() const override { return b_; }
  int64_t hash(int64_t x) const override;
  std::vector<int64_t> preimages(int64_t v, int64_t item_limit) const override;

 private:
  std::vector<int64_t> table_;
  int64_t b_;
};

// Stateless random oracle: h(x) = mix(seed, x) mod b. Exactly uniform and
// independent across x, which is what the estimator analysis assumes; used
// by Monte Carlo verification where the affine family's almost-2-wise bias
// would show through.
class RandomOracleHash final : public HashFn {
 public:
  RandomOracleHash(uint64_t seed, int64_t d, int64_t b) : seed_(seed), d_(d), b_(b) {}
  int64_t domain() const override { return d_; }
  int64_t range() const override { return b_; }
  int64_t hash(int64_t x) const override;
  std::vector<int64_t> preimages(int64_t v, int64_t item_limit) const override;

 private:
  uint64_t seed_;
  int64_t d_;
  int64_t b_;
};

}  // namespace ashdp::hashing
