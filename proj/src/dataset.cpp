#include "ashdp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>

namespace ashdp {

void CategoricalDataset::validate() const {
  if (n < 1 || d < 1) throw std::invalid_argument("dataset: n and d must be >= 1");
  if (static_cast<int64_t>(values.size()) != n)
    throw std::invalid_argument("dataset: values length != n");
  for (int64_t v : values)
    if (v < 1 || v > d) throw std::invalid_argument("dataset: value outside [1, d]");
}

void KVDataset::validate() const {
  if (n < 1 || d < 1) throw std::invalid_argument("kv dataset: n and d must be >= 1");
  if (static_cast<int64_t>(records.size()) != n)
    throw std::invalid_argument("kv dataset: records length != n");
  for (const auto& rec : records) {
    if (rec.empty() || static_cast<int64_t>(rec.size()) > d)
      throw std::invalid_argument("kv dataset: user must hold between 1 and d pairs");
    std::unordered_set<int64_t> seen;
    for (const auto& kv : rec) {
      if (kv.key < 1 || kv.key > d)
        throw std::invalid_argument("kv dataset: key outside [1, d]");
      if (kv.value < -1.0 || kv.value > 1.0)
        throw std::invalid_argument("kv dataset: value outside [-1, 1]");
      if (!seen.insert(kv.key).second)
        throw std::invalid_argument("kv dataset: duplicate key for one user");
    }
  }
}

FrequencyVector true_frequencies(const CategoricalDataset& dataset) {
  dataset.validate();
  FrequencyVector f;
  f.entries.assign(dataset.d, 0.0);
  for (int64_t v : dataset.values) f.entries[v - 1] += 1.0;
  for (double& e : f.entries) e /= static_cast<double>(dataset.n);
  return f;
}

KvStatistics true_kv_statistics(const KVDataset& dataset) {
  dataset.validate();
  KvStatistics stats;
  stats.phi.assign(dataset.d, 0.0);
  stats.psi.assign(dataset.d, 0.0);
  std::vector<int64_t> holders(dataset.d, 0);
  for (const auto& rec : dataset.records) {
    for (const auto& kv : rec) {
      holders[kv.key - 1] += 1;
      stats.psi[kv.key - 1] += kv.value;
    }
  }
  for (int64_t i = 0; i < dataset.d; ++i) {
    stats.phi[i] = static_cast<double>(holders[i]) / static_cast<double>(dataset.n);
    stats.psi[i] = holders[i] > 0 ? stats.psi[i] / static_cast<double>(holders[i]) : 0.0;
  }
  return stats;
}

namespace {

// Inverse-CDF Zipf sampler with a precomputed cumulative table. Uniform
// (s == 0) is sampled directly so d can be large.
class ZipfSampler {
 public:
  ZipfSampler(int64_t d, double s) : d_(d), uniform_(s == 0.0) {
    if (uniform_) return;
    cdf_.resize(static_cast<size_t>(d));
    double acc = 0.0;
    for (int64_t i = 1; i <= d; ++i) {
      acc += std::pow(static_cast<double>(i), -s);
      cdf_[static_cast<size_t>(i - 1)] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }

  int64_t draw(Rng& rng) const {
    if (uniform_) return static_cast<int64_t>(rng.uniform_u64(static_cast<uint64_t>(d_))) + 1;
    double u = rng.uniform_real();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int64_t>(it - cdf_.begin()) + 1;
  }

 private:
  int64_t d_;
  bool uniform_;
  std::vector<double> cdf_;
};

}  // namespace

CategoricalDataset synth_zipf(int64_t n, int64_t d, double exponent, uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("synth_zipf: n and d must be >= 1");
  if (exponent < 0.0) throw std::invalid_argument("synth_zipf: exponent must be >= 0");
  ZipfSampler sampler(d, exponent);
  Rng rng = Rng(seed).substream("synth/zipf");
  CategoricalDataset out;
  out.n = n;
  out.d = d;
  out.values.resize(static_cast<size_t>(n));
  for (auto& v : out.values) v = sampler.draw(rng);
  return out;
}

double ValueLaw::key_mean(int64_t key) const {
  // Deterministic mean in [-1, 1] spread over keys.
  return static_cast<double>((key * 37) % 21) / 10.0 - 1.0;
}

KVDataset synth_kv(int64_t n, int64_t d, PairsPerUserLaw pairs, ValueLaw values,
                   uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("synth_kv: n and d must be >= 1");
  if (pairs.k < 1 || pairs.k > d)
    throw std::invalid_argument("synth_kv: pairs-per-user must be in [1, d]");
  Rng rng = Rng(seed).substream("synth/kv");
  ZipfSampler key_sampler(d, 0.8);
  KVDataset out;
  out.n = n;
  out.d = d;
  out.records.resize(static_cast<size_t>(n));
  for (auto& rec : out.records) {
    int64_t count = pairs.kind == PairsPerUserLaw::kFixed ? pairs.k
                                                          : rng.uniform_int(1, pairs.k);
    std::unordered_set<int64_t> keys;
    while (static_cast<int64_t>(keys.size()) < count) keys.insert(key_sampler.draw(rng));
    rec.reserve(keys.size());
    for (int64_t key : keys) {
      double v = 0.0;
      switch (values.kind) {
        case ValueLaw::kUniform: v = rng.uniform_real() * 2.0 - 1.0; break;
        case ValueLaw::kSigns: v = rng.bernoulli(0.5) ? 1.0 : -1.0; break;
        case ValueLaw::kKeyConst: v = values.key_mean(key); break;
      }
      rec.push_back({key, v});
    }
    std::sort(rec.begin(), rec.end(),
              [](const KvPair& a, const KvPair& b) { return a.key < b.key; });
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void fail_line(const std::string& path, size_t line_no, const std::string& msg) {
  throw DatasetError(path + ":" + std::to_string(line_no) + ": " + msg);
}

int64_t parse_int(const std::string& s, const std::string& path, size_t line_no,
                  const char* what) {
  try {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail_line(path, line_no, std::string("cannot parse ") + what + " '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& path, size_t line_no,
                    const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail_line(path, line_no, std::string("cannot parse ") + what + " '" + s + "'");
  }
}

}  // namespace

CategoricalDataset load_categorical_csv(const std::string& path, int64_t d) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path + ": cannot open");
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw DatasetError(path + ": empty file");
  ++line_no;
  if (split_csv_line(line) != std::vector<std::string>{"user_id", "item"})
    fail_line(path, line_no, "expected header 'user_id,item'");
  CategoricalDataset out;
  int64_t max_item = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) fail_line(path, line_no, "expected 2 fields");
    int64_t item = parse_int(fields[1], path, line_no, "item");
    if (item < 1) fail_line(path, line_no, "item must be >= 1");
    if (d > 0 && item > d) fail_line(path, line_no, "item exceeds d");
    out.values.push_back(item);
    max_item = std::max(max_item, item);
  }
  if (out.values.empty()) throw DatasetError(path + ": no data rows");
  out.n = static_cast<int64_t>(out.values.size());
  out.d = d > 0 ? d : max_item;
  out.validate();
  return out;
}

KVDataset load_kv_csv(const std::string& path, int64_t d) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path + ": cannot open");
  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) throw DatasetError(path + ": empty file");
  ++line_no;
  if (split_csv_line(line) != std::vector<std::string>{"user_id", "key", "value"})
    fail_line(path, line_no, "expected header 'user_id,key,value'");

  // Rows are grouped by user_id in order of first appearance.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, size_t> user_index;
  std::vector<std::vector<KvPair>> records;
  int64_t max_key = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) fail_line(path, line_no, "expected 3 fields");
    int64_t key = parse_int(fields[1], path, line_no, "key");
    double value = parse_double(fields[2], path, line_no, "value");
    if (key < 1) fail_line(path, line_no, "key must be >= 1");
    if (d > 0 && key > d) fail_line(path, line_no, "key exceeds d");
    if (value < -1.0 || value > 1.0) fail_line(path, line_no, "value outside [-1, 1]");
    auto [it, inserted] = user_index.try_emplace(fields[0], records.size());
    if (inserted) records.emplace_back();
    for (const auto& kv : records[it->second])
      if (kv.key == key) fail_line(path, line_no, "duplicate key for user " + fields[0]);
    records[it->second].push_back({key, value});
    max_key = std::max(max_key, key);
  }
  if (records.empty()) throw DatasetError(path + ": no data rows");
  KVDataset out;
  out.n = static_cast<int64_t>(records.size());
  out.d = d > 0 ? d : max_key;
  out.records = std::move(records);
  out.validate();
  return out;
}

namespace {

template <typename Dataset>
Dataset sample_impl(const Dataset& dataset, double probability, Rng& rng,
                    const char* what) {
  if (probability <= 0.0 || probability > 1.0)
    throw std::invalid_argument(std::string(what) + ": probability must be in (0, 1]");
  if (probability == 1.0) return dataset;
  Dataset out;
  out.d = dataset.d;
  Rng stream = rng.substream("user_sample");
  if constexpr (std::is_same_v<Dataset, CategoricalDataset>) {
    for (int64_t v : dataset.values)
      if (stream.bernoulli(probability)) out.values.push_back(v);
    out.n = static_cast<int64_t>(out.values.size());
    if (out.n == 0) throw std::runtime_error("user_sample: empty result");
  } else {
    for (const auto& rec : dataset.records)
      if (stream.bernoulli(probability)) out.records.push_back(rec);
    out.n = static_cast<int64_t>(out.records.size());
    if (out.n == 0) throw std::runtime_error("user_sample: empty result");
  }
  return out;
}

}  // namespace

CategoricalDataset user_sample(const CategoricalDataset& dataset, double probability,
                               Rng& rng) {
  return sample_impl(dataset, probability, rng, "user_sample");
}

KVDataset user_sample(const KVDataset& dataset, double probability, Rng& rng) {
  return sample_impl(dataset, probability, rng, "user_sample");
}

}  // namespace ashdp
