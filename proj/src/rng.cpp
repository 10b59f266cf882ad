#include "ashdp/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ashdp {

namespace {

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

uint64_t Rng::mix(uint64_t z) {
  z += kGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::substream(std::string_view name) const {
  return Rng(mix(state_ ^ fnv1a(name)), 0);
}

Rng Rng::substream(std::string_view name, uint64_t index) const {
  return Rng(mix(mix(state_ ^ fnv1a(name)) ^ (index + 1)), 0);
}

uint64_t Rng::next_u64() {
  state_ += kGamma;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t Rng::uniform_u64(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_u64: bound must be positive");
  if (bound == 1) return 0;
  // Rejection sampling on the top multiple of bound.
  uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
  for (;;) {
    uint64_t x = next_u64();
    if (x <= limit || limit == UINT64_MAX) return x % bound;
  }
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  return lo + static_cast<int64_t>(uniform_u64(static_cast<uint64_t>(hi - lo) + 1));
}

double Rng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform_real() < p;
}

int64_t Rng::geometric_failures(double decay) {
  if (decay <= 0.0) return 0;
  if (decay >= 1.0) throw std::invalid_argument("geometric_failures: decay must be < 1");
  double u = uniform_real();
  while (u <= 0.0) u = uniform_real();
  return static_cast<int64_t>(std::floor(std::log(u) / std::log(decay)));
}

std::vector<uint32_t> Rng::permutation(size_t n) {
  std::vector<uint32_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = static_cast<uint32_t>(i);
  shuffle(p);
  return p;
}

}  // namespace ashdp
