#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ashdp/rng.hpp"

namespace ashdp {

// Items and keys are 1-based everywhere, matching the [d] convention of the
// protocol descriptions and the CSV file formats.

struct CategoricalDataset {
  int64_t n = 0;
  int64_t d = 0;
  std::vector<int64_t> values;  // length n, each in [1, d]

  void validate() const;
};

struct KvPair {
  int64_t key = 0;    // in [1, d]
  double value = 0.;  // in [-1, 1]
};

struct KVDataset {
  int64_t n = 0;
  int64_t d = 0;
  std::vector<std::vector<KvPair>> records;  // per user, distinct keys

  void validate() const;
};

struct FrequencyVector {
  std::vector<double> entries;  // length d
};

// Per-key frequency Phi and mean value Psi. Psi is reported as 0 for keys
// nobody holds (keeps MSE metrics finite).
struct KvStatistics {
  std::vector<double> phi;
  std::vector<double> psi;
};

FrequencyVector true_frequencies(const CategoricalDataset& dataset);
KvStatistics true_kv_statistics(const KVDataset& dataset);

// Zipf(s) over [d]: P(i) proportional to i^-s. s = 0 is uniform.
CategoricalDataset synth_zipf(int64_t n, int64_t d, double exponent, uint64_t seed);

// Synthetic KV data. Laws are small descriptors:
//   pairs per user: {fixed k} or {uniform 1..k}
//   values: uniform in [-1,1], random signs (+-1), or a fixed per-key mean.
struct PairsPerUserLaw {
  enum Kind { kFixed, kUniform } kind = kFixed;
  int64_t k = 1;
  static PairsPerUserLaw fixed(int64_t k) { return {kFixed, k}; }
  static PairsPerUserLaw uniform(int64_t k) { return {kUniform, k}; }
};
struct ValueLaw {
  enum Kind { kUniform, kSigns, kKeyConst } kind = kUniform;
  static ValueLaw uniform() { return {kUniform}; }
  static ValueLaw signs() { return {kSigns}; }
  static ValueLaw key_const() { return {kKeyConst}; }
  double key_mean(int64_t key) const;
};

KVDataset synth_kv(int64_t n, int64_t d, PairsPerUserLaw pairs, ValueLaw values,
                   uint64_t seed);

// CSV loaders. Categorical header: user_id,item (one row per user).
// KV header: user_id,key,value (one row per pair). Malformed or out-of-range
// rows raise DatasetError with the offending line number. When d == 0 it is
// inferred as the largest item/key seen.
struct DatasetError : std::runtime_error {
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

CategoricalDataset load_categorical_csv(const std::string& path, int64_t d = 0);
KVDataset load_kv_csv(const std::string& path, int64_t d = 0);

// Bernoulli user sampling; keeps dataset d. Used to shrink large datasets
// before a run while metrics stay against the pre-sampling truth.
CategoricalDataset user_sample(const CategoricalDataset& dataset, double probability,
                               Rng& rng);
KVDataset user_sample(const KVDataset& dataset, double probability, Rng& rng);

}  // namespace ashdp
