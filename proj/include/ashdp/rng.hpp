#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ashdp {

// Counter-based deterministic generator (splitmix64). Identical seeds yield
// identical streams on every platform; no libstdc++ distribution objects are
// used anywhere, so outputs are bit-stable across compilers.
//
// Independent sub-streams are derived by name (and optional index), e.g.
//   rng.substream("shuffler").substream("dummy1", trial)
// so that injecting fixed randomness into one stage never perturbs another.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed ^ kDomainTag)) {}

  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, uint64_t index) const;

  uint64_t next_u64();

  // Uniform in [0, bound). bound == 0 is an error; bound == 1 consumes no draw.
  uint64_t uniform_u64(uint64_t bound);

  // Uniform in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform_real();

  bool bernoulli(double p);

  // Number of failures before the first success, success prob 1 - decay.
  int64_t geometric_failures(double decay);

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<uint32_t> permutation(size_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    if (values.size() < 2) return;
    for (size_t i = values.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(uniform_u64(i + 1));
      std::swap(values[i], values[j]);
    }
  }

  uint64_t state() const { return state_; }

 private:
  static constexpr uint64_t kDomainTag = 0x61736864702d7632ULL;  // "ashdp-v2"
  static uint64_t mix(uint64_t z);

  explicit Rng(uint64_t raw_state, int) : state_(raw_state) {}

  uint64_t state_;
};

}  // namespace ashdp
