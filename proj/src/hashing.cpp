#include "ashdp/hashing.hpp"

#include <algorithm>
#include <stdexcept>

namespace ashdp::hashing {

namespace {

using u128 = unsigned __int128;

uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % m);
}

uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t m) {
  uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Modular inverse for prime modulus.
uint64_t inv_mod(uint64_t a, uint64_t p) { return pow_mod(a % p, p - 2, p); }

uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool is_prime(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  // Deterministic witness set for all 64-bit integers.
  for (uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    uint64_t x = pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 0; i < r - 1; ++i) {
      x = mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

uint64_t next_prime_at_least(uint64_t n) {
  if (n <= 2) return 2;
  uint64_t c = n | 1;  // first odd >= n
  while (!is_prime(c)) c += 2;
  return c;
}

int64_t UniversalHash::hash(int64_t x) const {
  if (x < 1 || x > d) throw std::out_of_range("hash: x outside [1, d]");
  uint64_t y = (mul_mod(a1, static_cast<uint64_t>(x) % p, p) + a0) % p;
  return static_cast<int64_t>(y % static_cast<uint64_t>(b)) + 1;
}

std::vector<int64_t> UniversalHash::preimages(int64_t v) const {
  if (v < 1 || v > b) throw std::out_of_range("preimages: v outside [1, b]");
  std::vector<int64_t> out;
  uint64_t inv = inv_mod(a1, p);
  for (uint64_t y = static_cast<uint64_t>(v - 1); y < p; y += static_cast<uint64_t>(b)) {
    uint64_t x = mul_mod(inv, (y + p - a0) % p, p);
    // Residue 0 denotes x = p, in-domain only when p == d.
    if (x == 0) x = p;
    if (x <= static_cast<uint64_t>(d)) out.push_back(static_cast<int64_t>(x));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int64_t UniversalHash::preimage_scan_cost() const {
  return static_cast<int64_t>((p + static_cast<uint64_t>(b) - 1) / static_cast<uint64_t>(b));
}

UniversalHash sample_hash(int64_t d, int64_t b, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_hash: d must be >= 1");
  if (b < 1 || b > d) throw std::invalid_argument("sample_hash: b must be in [1, d]");
  UniversalHash h;
  h.d = d;
  h.b = b;
  h.p = next_prime_at_least(static_cast<uint64_t>(d));
  h.a1 = 1 + rng.uniform_u64(h.p - 1);
  h.a0 = rng.uniform_u64(h.p);
  return h;
}

std::vector<int64_t> AffineHash::preimages(int64_t v, int64_t item_limit) const {
  auto all = h_.preimages(v);
  if (item_limit >= h_.d) return all;
  all.erase(std::upper_bound(all.begin(), all.end(), item_limit), all.end());
  return all;
}

TableHash::TableHash(std::vector<int64_t> table, int64_t b)
    : table_(std::move(table)), b_(b) {
  if (table_.empty() || b_ < 1) throw std::invalid_argument("TableHash: empty table");
  for (int64_t v : table_)
    if (v < 1 || v > b_) throw std::invalid_argument("TableHash: value outside [1, b]");
}

int64_t TableHash::hash(int64_t x) const {
  if (x < 1 || x > domain()) throw std::out_of_range("TableHash: x outside domain");
  return table_[static_cast<size_t>(x - 1)];
}

std::vector<int64_t> TableHash::preimages(int64_t v, int64_t item_limit) const {
  std::vector<int64_t> out;
  int64_t limit = std::min<int64_t>(item_limit, domain());
  for (int64_t x = 1; x <= limit; ++x)
    if (table_[static_cast<size_t>(x - 1)] == v) out.push_back(x);
  return out;
}

int64_t RandomOracleHash::hash(int64_t x) const {
  if (x < 1 || x > d_) throw std::out_of_range("RandomOracleHash: x outside domain");
  return static_cast<int64_t>(mix64(seed_ ^ (0x68617368ULL + static_cast<uint64_t>(x))) %
                              static_cast<uint64_t>(b_)) +
         1;
}

std::vector<int64_t> RandomOracleHash::preimages(int64_t v, int64_t item_limit) const {
  std::vector<int64_t> out;
  int64_t limit = std::min<int64_t>(item_limit, d_);
  for (int64_t x = 1; x <= limit; ++x)
    if (hash(x) == v) out.push_back(x);
  return out;
}

}  // namespace ashdp::hashing
