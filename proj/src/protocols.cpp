#include "ashdp/protocols.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ashdp::protocols {

namespace {

using crypto::CipherSuite;
using crypto::KeyPair;
using crypto::LayeredCiphertext;
using crypto::Payload;
using dummy::DummyCountDistribution;
using transport::LogMode;
using transport::PartyId;
using transport::Transcript;

double lambda_element_bits(int64_t d) {
  return std::ceil(std::log2(static_cast<double>(d) + 1.0));
}

std::vector<bool> draw_keep(int64_t count, double beta, const ReplayScript* replay,
                            Rng& stream) {
  if (replay && replay->keep) {
    if (static_cast<int64_t>(replay->keep->size()) != count)
      throw std::invalid_argument("replay: keep mask size mismatch");
    return *replay->keep;
  }
  std::vector<bool> keep(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) keep[static_cast<size_t>(i)] = stream.bernoulli(beta);
  return keep;
}

std::vector<int64_t> draw_symbol_dummies(int64_t symbols,
                                         const DummyCountDistribution& dist,
                                         const std::optional<std::vector<int64_t>>& scripted,
                                         Rng& stream) {
  if (scripted) {
    if (static_cast<int64_t>(scripted->size()) != symbols)
      throw std::invalid_argument("replay: dummy count vector size mismatch");
    return *scripted;
  }
  std::vector<int64_t> z(static_cast<size_t>(symbols));
  for (auto& v : z) v = dist.sample(stream);
  return z;
}

int64_t index_in_sorted(const std::vector<int64_t>& sorted, int64_t value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  if (it == sorted.end() || *it != value) return -1;
  return static_cast<int64_t>(it - sorted.begin());
}

}  // namespace

double ProtocolOutput::estimate_for(int64_t item) const {
  if (!sparse) return dense.at(static_cast<size_t>(item - 1));
  int64_t idx = index_in_sorted(lambda, item);
  return idx < 0 ? 0.0 : lambda_estimates[static_cast<size_t>(idx)];
}

bool ProtocolOutput::selected(int64_t item) const {
  if (!sparse) return true;
  return index_in_sorted(lambda, item) >= 0;
}

double KvOutput::phi_for(int64_t key) const {
  int64_t idx = index_in_sorted(lambda, key);
  return idx < 0 ? 0.0 : phi[static_cast<size_t>(idx)];
}

double KvOutput::psi_for(int64_t key) const {
  int64_t idx = index_in_sorted(lambda, key);
  return idx < 0 ? 1.0 : psi[static_cast<size_t>(idx)];
}

bool KvOutput::selected(int64_t key) const { return index_in_sorted(lambda, key) >= 0; }

// ---------------------------------------------------------------------------
// LNF
// ---------------------------------------------------------------------------

ProtocolOutput lnf_run(const CategoricalDataset& data,
                       const DummyCountDistribution& dist, double beta,
                       const CipherSuite& suite, Rng& rng, const LnfOptions& opt) {
  data.validate();
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("lnf: beta in [0, 1]");
  const int64_t d = data.d;
  const int64_t n_total = data.n + static_cast<int64_t>(opt.fake_items.size());
  const bool full = opt.log_mode == LogMode::kFull;

  ProtocolOutput out;
  out.transcript = Transcript(n_total, opt.log_mode);
  Transcript& t = out.transcript;

  Rng key_rng = rng.substream("keys");
  KeyPair kd = suite.keygen(256, key_rng);
  const double tau1 = suite.size_bits_for_layers(1);

  std::vector<int64_t> sent_items(data.values);
  for (int64_t item : opt.fake_items) {
    if (item < 1 || item > d) throw std::invalid_argument("lnf: fake item outside [1, d]");
    sent_items.push_back(item);
  }
  for (int64_t i = 0; i < n_total; ++i)
    t.send(PartyId::user(i + 1), PartyId::shuffler(), tau1, 1);

  Rng sample_rng = rng.substream("shuffler/sample");
  std::vector<bool> keep = draw_keep(n_total, beta, opt.replay, sample_rng);

  Rng dummy_rng = rng.substream("shuffler/dummy");
  std::vector<int64_t> z = draw_symbol_dummies(
      d, dist, opt.replay ? opt.replay->dummies1 : std::nullopt, dummy_rng);

  std::vector<int64_t> counts(static_cast<size_t>(d), 0);
  int64_t kept = 0;
  for (int64_t i = 0; i < n_total; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    ++kept;
    counts[static_cast<size_t>(sent_items[static_cast<size_t>(i)] - 1)] += 1;
  }
  int64_t n_dummy = std::accumulate(z.begin(), z.end(), int64_t{0});
  for (int64_t i = 0; i < d; ++i) counts[static_cast<size_t>(i)] += z[static_cast<size_t>(i)];
  int64_t n_tilde = kept + n_dummy;

  if (full) {
    // Materialize the shuffled multiset and run it through the cipher, so the
    // measured sizes come from actual ciphertexts.
    std::vector<int64_t> records;
    records.reserve(static_cast<size_t>(n_tilde));
    for (int64_t i = 0; i < n_total; ++i)
      if (keep[static_cast<size_t>(i)]) records.push_back(sent_items[static_cast<size_t>(i)]);
    for (int64_t item = 1; item <= d; ++item)
      for (int64_t k = 0; k < z[static_cast<size_t>(item - 1)]; ++k) records.push_back(item);
    Rng perm_rng = rng.substream("shuffler/perm");
    if (opt.replay && opt.replay->pi) {
      if (opt.replay->pi->size() != records.size())
        throw std::invalid_argument("replay: pi size mismatch");
      std::vector<int64_t> shuffled(records.size());
      for (size_t i = 0; i < records.size(); ++i)
        shuffled[i] = records[(*opt.replay->pi)[i]];
      records = std::move(shuffled);
    } else {
      perm_rng.shuffle(records);
    }
    Rng enc_rng = rng.substream("shuffler/enc");
    double bits = 0.0;
    std::vector<int64_t> decrypted_counts(static_cast<size_t>(d), 0);
    for (int64_t item : records) {
      auto ct = suite.encrypt_layers(static_cast<Payload>(item), {&kd}, enc_rng);
      bits += suite.ciphertext_size_bits(ct);
      auto res = suite.decrypt_layer(ct, kd);
      if (!res.done) throw std::logic_error("lnf: expected payload after one peel");
      decrypted_counts[static_cast<size_t>(res.payload - 1)] += 1;
    }
    t.send(PartyId::shuffler(), PartyId::collector(), bits / std::max<int64_t>(n_tilde, 1),
           n_tilde);
    counts = std::move(decrypted_counts);
  } else {
    t.send(PartyId::shuffler(), PartyId::collector(), tau1, n_tilde);
  }
  t.close();

  out.dense.resize(static_cast<size_t>(d));
  const double mu = dist.mean();
  const double denom = static_cast<double>(n_total) * beta;
  for (int64_t i = 0; i < d; ++i)
    out.dense[static_cast<size_t>(i)] = (static_cast<double>(counts[static_cast<size_t>(i)]) - mu) / denom;
  return out;
}

// ---------------------------------------------------------------------------
// CH / GH core: LNF over per-group hashed values
// ---------------------------------------------------------------------------

namespace {

ProtocolOutput hashed_lnf_core(const CategoricalDataset& data,
                               const DummyCountDistribution& dist, double beta,
                               const std::vector<const hashing::HashFn*>& hashes,
                               const std::vector<int64_t>& group_of_user,
                               const CipherSuite& suite, Rng& rng, LogMode log_mode,
                               const std::vector<std::pair<int64_t, int64_t>>& fake_msgs,
                               const ReplayScript* replay) {
  const int64_t d = data.d;
  const int64_t g = static_cast<int64_t>(hashes.size());
  const int64_t b = hashes[0]->range();
  if (b < 2) throw std::invalid_argument("hashed protocol: b must be >= 2");
  const int64_t n_total = data.n + static_cast<int64_t>(fake_msgs.size());

  ProtocolOutput out;
  out.transcript = Transcript(n_total, log_mode);
  Transcript& t = out.transcript;

  Rng key_rng = rng.substream("keys");
  (void)suite.keygen(256, key_rng);
  const double tau1 = suite.size_bits_for_layers(1);

  // (group, hash value) per sender; fake messages name their pair directly.
  std::vector<std::pair<int64_t, int64_t>> msgs;
  msgs.reserve(static_cast<size_t>(n_total));
  for (int64_t i = 0; i < data.n; ++i) {
    int64_t grp = group_of_user[static_cast<size_t>(i)];
    msgs.emplace_back(grp, hashes[static_cast<size_t>(grp)]->hash(data.values[static_cast<size_t>(i)]));
  }
  for (const auto& fake : fake_msgs) {
    if (fake.first < 0 || fake.first >= g || fake.second < 1 || fake.second > b)
      throw std::invalid_argument("hashed protocol: bad fake message");
    msgs.push_back(fake);
  }
  for (int64_t i = 0; i < n_total; ++i)
    t.send(PartyId::user(i + 1), PartyId::shuffler(), tau1, 1);

  Rng sample_rng = rng.substream("shuffler/sample");
  std::vector<bool> keep = draw_keep(n_total, beta, replay, sample_rng);

  // Scripted dummy counts, when present, cover the flattened (group, value)
  // grid in row-major order.
  Rng dummy_rng = rng.substream("shuffler/dummy");
  std::vector<int64_t> z = draw_symbol_dummies(
      g * b, dist, replay ? replay->dummies1 : std::nullopt, dummy_rng);
  std::vector<int64_t> counts(static_cast<size_t>(g * b), 0);
  int64_t n_dummy = 0;
  for (int64_t cell = 0; cell < g * b; ++cell) {
    counts[static_cast<size_t>(cell)] += z[static_cast<size_t>(cell)];
    n_dummy += z[static_cast<size_t>(cell)];
  }
  int64_t kept = 0;
  for (int64_t i = 0; i < n_total; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    ++kept;
    const auto& [grp, hv] = msgs[static_cast<size_t>(i)];
    counts[static_cast<size_t>(grp * b + hv - 1)] += 1;
  }
  int64_t n_tilde = kept + n_dummy;
  if (log_mode == LogMode::kFull) {
    Rng perm_rng = rng.substream("shuffler/perm");
    (void)perm_rng.permutation(static_cast<size_t>(n_tilde));
  }
  t.send(PartyId::shuffler(), PartyId::collector(), tau1, n_tilde);
  t.close();

  const double mu = dist.mean();
  const double n_beta = static_cast<double>(n_total) * beta;
  const double scale = static_cast<double>(b) / (n_beta * static_cast<double>(b - 1));
  out.dense.resize(static_cast<size_t>(d));
  for (int64_t i = 1; i <= d; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < g; ++j)
      sum += static_cast<double>(
          counts[static_cast<size_t>(j * b + hashes[static_cast<size_t>(j)]->hash(i) - 1)]);
    out.dense[static_cast<size_t>(i - 1)] =
        scale * (sum - n_beta / static_cast<double>(b) - static_cast<double>(g) * mu);
  }
  return out;
}

}  // namespace

ProtocolOutput ch_run(const CategoricalDataset& data, const DummyCountDistribution& dist,
                      double beta, const hashing::HashFn& hash, const CipherSuite& suite,
                      Rng& rng, const ChOptions& opt) {
  data.validate();
  std::vector<std::pair<int64_t, int64_t>> fakes;
  fakes.reserve(opt.fake_hash_values.size());
  for (int64_t hv : opt.fake_hash_values) fakes.emplace_back(0, hv);
  std::vector<int64_t> groups(static_cast<size_t>(data.n), 0);
  return hashed_lnf_core(data, dist, beta, {&hash}, groups, suite, rng, opt.log_mode,
                         fakes, opt.replay);
}

ProtocolOutput gh_run(const CategoricalDataset& data, const DummyCountDistribution& dist,
                      double beta, int64_t g, int64_t b, const CipherSuite& suite,
                      Rng& rng, const HashFactory& factory, LogMode log_mode) {
  data.validate();
  if (g < 1 || g > data.n) throw std::invalid_argument("gh: g must be in [1, n]");
  Rng hash_rng = rng.substream("hashes");
  std::vector<std::unique_ptr<hashing::HashFn>> owned;
  owned.reserve(static_cast<size_t>(g));
  for (int64_t j = 0; j < g; ++j) {
    if (factory) {
      owned.push_back(factory(j, hash_rng));
    } else {
      owned.push_back(
          std::make_unique<hashing::AffineHash>(hashing::sample_hash(data.d, b, hash_rng)));
    }
  }
  std::vector<const hashing::HashFn*> hashes;
  for (const auto& h : owned) hashes.push_back(h.get());

  // Group assignment: trivial for g = 1, one group per user for g = n,
  // uniform otherwise.
  std::vector<int64_t> groups(static_cast<size_t>(data.n), 0);
  if (g == data.n) {
    for (int64_t i = 0; i < data.n; ++i) groups[static_cast<size_t>(i)] = i;
  } else if (g > 1) {
    Rng group_rng = rng.substream("groups");
    for (auto& grp : groups)
      grp = static_cast<int64_t>(group_rng.uniform_u64(static_cast<uint64_t>(g)));
  }
  return hashed_lnf_core(data, dist, beta, hashes, groups, suite, rng, log_mode, {},
                         nullptr);
}

// ---------------------------------------------------------------------------
// FilterItems
// ---------------------------------------------------------------------------

FilterResult filter_items(const std::vector<int64_t>& hash_counts, double alpha,
                          const DummyCountDistribution& d1, int64_t l,
                          const hashing::HashFn& hash, int64_t item_limit) {
  if (l < 1) throw std::invalid_argument("filter_items: l must be >= 1");
  FilterResult res;
  res.z_th = d1.tail_threshold(alpha);
  std::vector<int64_t> candidates;
  for (int64_t v = 1; v <= static_cast<int64_t>(hash_counts.size()); ++v)
    if (hash_counts[static_cast<size_t>(v - 1)] >= res.z_th) candidates.push_back(v);
  if (static_cast<int64_t>(candidates.size()) > l) {
    std::sort(candidates.begin(), candidates.end(), [&](int64_t a, int64_t b_) {
      int64_t ca = hash_counts[static_cast<size_t>(a - 1)];
      int64_t cb = hash_counts[static_cast<size_t>(b_ - 1)];
      return ca != cb ? ca > cb : a < b_;
    });
    candidates.resize(static_cast<size_t>(l));
    std::sort(candidates.begin(), candidates.end());
  }
  res.lambda_hashes = std::move(candidates);
  for (int64_t v : res.lambda_hashes) {
    auto pre = hash.preimages(v, item_limit);
    res.lambda.insert(res.lambda.end(), pre.begin(), pre.end());
  }
  std::sort(res.lambda.begin(), res.lambda.end());
  return res;
}

// ---------------------------------------------------------------------------
// FME
// ---------------------------------------------------------------------------

void FmeConfig::validate(int64_t d) const {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("fme config: beta in [0, 1]");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("fme config: alpha in [0, 1]");
  if (l < 1 || l > b || b > d)
    throw std::invalid_argument("fme config: need 1 <= l <= b <= d");
  if (budget) {
    budget->validate();
    if (!budget->part1)
      throw std::invalid_argument("fme config: budget must carry a split");
    auto [eps1, delta1] = *budget->part1;
    auto [eps2, delta2] = *budget->part2;
    if (dummy::certify_dp(d1, beta, eps1 / 2.0) > delta1 / 2.0 + 1e-15)
      throw std::invalid_argument("fme config: D1 fails its certification");
    if (dummy::certify_dp(d2, 1.0, eps2 / 2.0) > delta2 / 2.0 + 1e-15)
      throw std::invalid_argument("fme config: D2 fails its certification");
  }
}

FmeConfig make_fme_config(const dummy::PrivacyBudget& budget, double beta, double alpha,
                          int64_t l, int64_t b, CipherSuite suite) {
  if (!budget.part1) throw std::invalid_argument("make_fme_config: budget must be split");
  FmeConfig cfg;
  cfg.budget = budget;
  cfg.d1 = dummy::calibrate_offset(budget.part1->first / 2.0, budget.part1->second / 2.0,
                                   beta);
  cfg.d2 = dummy::calibrate_offset(budget.part2->first / 2.0, budget.part2->second / 2.0,
                                   1.0);
  cfg.beta = beta;
  cfg.alpha = alpha;
  cfg.l = l;
  cfg.b = b;
  cfg.suite = suite;
  return cfg;
}

namespace {

struct FmeRecord {
  int64_t hash_value = 0;
  Payload payload = crypto::kBottom;
  bool shuffler_dummy = false;
  // Full mode carries the actual ciphertexts: genuine records forward the
  // users' encryptions, dummies are encrypted by the shuffler.
  LayeredCiphertext ct_hash;
  LayeredCiphertext ct_item;
};

}  // namespace

ProtocolOutput fme_run(const CategoricalDataset& data, const FmeConfig& cfg,
                       const hashing::HashFn& hash, Rng& rng, const FmeOptions& opt) {
  data.validate();
  cfg.validate(data.d);
  if (hash.range() != cfg.b) throw std::invalid_argument("fme: hash range != config b");
  const int64_t d = data.d;
  const int64_t b = cfg.b;
  const bool full = cfg.log_mode == LogMode::kFull;
  const int64_t n_total = data.n + static_cast<int64_t>(opt.fakes.size());
  const CipherSuite& suite = cfg.suite;

  ProtocolOutput out;
  out.sparse = true;
  out.transcript = Transcript(n_total, cfg.log_mode);
  Transcript& t = out.transcript;

  Rng key_rng = rng.substream("keys");
  KeyPair kd = suite.keygen(256, key_rng);
  KeyPair ks = suite.keygen(256, key_rng);
  const double tau1 = suite.size_bits_for_layers(1);
  const double tau2 = suite.size_bits_for_layers(2);
  const double tau3 = suite.size_bits_for_layers(3);

  // Users send <E[h(x)], E[E[E[x]]]> once.
  std::vector<int64_t> msg_hash(static_cast<size_t>(n_total));
  std::vector<Payload> msg_item(static_cast<size_t>(n_total));
  for (int64_t i = 0; i < data.n; ++i) {
    int64_t x = data.values[static_cast<size_t>(i)];
    msg_hash[static_cast<size_t>(i)] = hash.hash(x);
    msg_item[static_cast<size_t>(i)] = static_cast<Payload>(x);
  }
  for (size_t f = 0; f < opt.fakes.size(); ++f) {
    const FmeFake& fake = opt.fakes[f];
    if (fake.hash_value < 1 || fake.hash_value > b)
      throw std::invalid_argument("fme: fake hash value outside [1, b]");
    if (fake.item < 0 || fake.item > d)
      throw std::invalid_argument("fme: fake item outside [0, d]");
    msg_hash[static_cast<size_t>(data.n) + f] = fake.hash_value;
    msg_item[static_cast<size_t>(data.n) + f] = static_cast<Payload>(fake.item);
  }

  Rng enc_rng = rng.substream("enc");
  std::vector<LayeredCiphertext> ct_hash, ct_item;
  if (full) {
    ct_hash.reserve(static_cast<size_t>(n_total));
    ct_item.reserve(static_cast<size_t>(n_total));
  }
  for (int64_t i = 0; i < n_total; ++i) {
    double bits = tau1 + tau3;
    if (full) {
      ct_hash.push_back(suite.encrypt_layers(
          static_cast<Payload>(msg_hash[static_cast<size_t>(i)]), {&kd}, enc_rng));
      ct_item.push_back(
          suite.encrypt_layers(msg_item[static_cast<size_t>(i)], {&kd, &ks, &kd}, enc_rng));
      bits = suite.ciphertext_size_bits(ct_hash.back()) +
             suite.ciphertext_size_bits(ct_item.back());
    }
    t.send(PartyId::user(i + 1), PartyId::shuffler(), bits, 1);
  }

  // Shuffler: sampling, dummy hash data, shuffle.
  Rng sample_rng = rng.substream("shuffler/sample");
  std::vector<bool> keep = draw_keep(n_total, cfg.beta, opt.replay, sample_rng);
  Rng dummy1_rng = rng.substream("shuffler/dummy1");
  std::vector<int64_t> z1 = draw_symbol_dummies(
      b, cfg.d1, opt.replay ? opt.replay->dummies1 : std::nullopt, dummy1_rng);
  int64_t kept = 0;
  for (int64_t i = 0; i < n_total; ++i)
    if (keep[static_cast<size_t>(i)]) ++kept;
  int64_t n_dummy1 = std::accumulate(z1.begin(), z1.end(), int64_t{0});
  int64_t n_tilde = kept + n_dummy1;

  // Plaintext view of the first shuffled batch. Counter mode never
  // materializes the dummy records; their effect is the per-symbol counts.
  std::vector<FmeRecord> records;
  if (full) {
    records.reserve(static_cast<size_t>(n_tilde));
    for (int64_t i = 0; i < n_total; ++i) {
      if (!keep[static_cast<size_t>(i)]) continue;
      FmeRecord r{msg_hash[static_cast<size_t>(i)], msg_item[static_cast<size_t>(i)],
                  false, {}, {}};
      r.ct_hash = std::move(ct_hash[static_cast<size_t>(i)]);
      r.ct_item = std::move(ct_item[static_cast<size_t>(i)]);
      records.push_back(std::move(r));
    }
    Rng dummy_enc = rng.substream("shuffler/enc1");
    for (int64_t v = 1; v <= b; ++v) {
      for (int64_t k = 0; k < z1[static_cast<size_t>(v - 1)]; ++k) {
        FmeRecord r{v, crypto::kBottom, true, {}, {}};
        r.ct_hash = suite.encrypt_layers(static_cast<Payload>(v), {&kd}, dummy_enc);
        r.ct_item = suite.encrypt_layers(crypto::kBottom, {&kd, &ks, &kd}, dummy_enc);
        records.push_back(std::move(r));
      }
    }
    Rng perm_rng = rng.substream("shuffler/perm1");
    if (opt.replay && opt.replay->pi) {
      if (opt.replay->pi->size() != records.size())
        throw std::invalid_argument("replay: pi size mismatch");
      std::vector<FmeRecord> shuffled(records.size());
      for (size_t i = 0; i < records.size(); ++i)
        shuffled[i] = std::move(records[(*opt.replay->pi)[i]]);
      records = std::move(shuffled);
    } else {
      perm_rng.shuffle(records);
    }
  }

  // Shuffler -> collector: n_tilde <single, triple> pairs.
  double batch1_bits = static_cast<double>(n_tilde) * (tau1 + tau3);
  if (full) {
    batch1_bits = 0.0;
    for (const FmeRecord& r : records)
      batch1_bits += suite.ciphertext_size_bits(r.ct_hash) +
                     suite.ciphertext_size_bits(r.ct_item);
  }
  if (n_tilde > 0)
    t.send(PartyId::shuffler(), PartyId::collector(),
           batch1_bits / static_cast<double>(n_tilde), n_tilde);

  // Collector: decrypt hash values and the outer layer of the triples, count.
  std::vector<int64_t> hash_counts(static_cast<size_t>(b), 0);
  std::vector<LayeredCiphertext> doubles;  // full mode: E_ks[E_kd[.]]
  if (full) {
    doubles.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
      auto hv = suite.decrypt_layer(records[i].ct_hash, kd);
      if (!hv.done) throw std::logic_error("fme: hash value should decrypt in one peel");
      hash_counts[static_cast<size_t>(hv.payload - 1)] += 1;
      auto peeled = suite.decrypt_layer(records[i].ct_item, kd);
      if (peeled.done) throw std::logic_error("fme: triple should not finish in one peel");
      doubles.push_back(std::move(peeled.inner));
      // The decrypted hash value is what filtering uses; it matches the
      // shuffler-side record by construction.
      records[i].hash_value = static_cast<int64_t>(hv.payload);
    }
  } else {
    for (int64_t i = 0; i < n_total; ++i)
      if (keep[static_cast<size_t>(i)])
        hash_counts[static_cast<size_t>(msg_hash[static_cast<size_t>(i)] - 1)] += 1;
    for (int64_t v = 1; v <= b; ++v)
      hash_counts[static_cast<size_t>(v - 1)] += z1[static_cast<size_t>(v - 1)];
  }

  if (opt.post_noise_p) {
    Rng noise_rng = rng.substream("collector/noise1");
    for (auto& c : hash_counts) c += dummy::two_sided_geometric(*opt.post_noise_p, noise_rng);
  }

  FilterResult filt = filter_items(hash_counts, cfg.alpha, cfg.d1, cfg.l, hash, d);
  out.z_th = filt.z_th;
  std::vector<bool> hash_selected(static_cast<size_t>(b), false);
  for (int64_t v : filt.lambda_hashes) hash_selected[static_cast<size_t>(v - 1)] = true;

  // Collector -> shuffler: selected set + the doubles (unselected payloads
  // replaced with fresh encryptions of the sentinel).
  double batch2_bits = static_cast<double>(n_tilde) * tau2;
  if (full) {
    batch2_bits = 0.0;
    Rng replace_rng = rng.substream("collector/enc");
    for (size_t i = 0; i < records.size(); ++i) {
      if (!hash_selected[static_cast<size_t>(records[i].hash_value - 1)])
        doubles[i] = suite.encrypt_layers(crypto::kBottom, {&kd, &ks}, replace_rng);
      batch2_bits += suite.ciphertext_size_bits(doubles[i]);
    }
  }
  if (n_tilde > 0)
    t.send(PartyId::collector(), PartyId::shuffler(),
           batch2_bits / static_cast<double>(n_tilde), n_tilde);
  if (!filt.lambda.empty())
    t.send(PartyId::collector(), PartyId::shuffler(),
           lambda_element_bits(d) * static_cast<double>(filt.lambda.size()), 1);

  // Shuffler: peel own layer, drop the round-1 dummies it created, add D2
  // dummies per selected item, shuffle again.
  Rng dummy2_rng = rng.substream("shuffler/dummy2");
  std::vector<int64_t> z2(filt.lambda.size(), 0);
  if (opt.replay && opt.replay->dummies2) {
    for (size_t idx = 0; idx < filt.lambda.size(); ++idx) {
      auto it = opt.replay->dummies2->find(filt.lambda[idx]);
      z2[idx] = it == opt.replay->dummies2->end() ? 0 : it->second;
    }
  } else {
    for (auto& v : z2) v = cfg.d2.sample(dummy2_rng);
  }
  int64_t n_dummy2 = std::accumulate(z2.begin(), z2.end(), int64_t{0});
  int64_t n_star = kept + n_dummy2;

  std::vector<int64_t> item_counts(filt.lambda.size(), 0);
  double batch3_bits = static_cast<double>(n_star) * tau1;
  if (full) {
    std::vector<LayeredCiphertext> singles;
    singles.reserve(static_cast<size_t>(n_star));
    for (size_t i = 0; i < records.size(); ++i) {
      auto peeled = suite.decrypt_layer(doubles[i], ks);
      if (peeled.done) throw std::logic_error("fme: double should not finish in one peel");
      if (records[i].shuffler_dummy) continue;  // shuffler knows pi
      singles.push_back(std::move(peeled.inner));
    }
    Rng enc2_rng = rng.substream("shuffler/enc2");
    for (size_t idx = 0; idx < filt.lambda.size(); ++idx)
      for (int64_t k = 0; k < z2[idx]; ++k)
        singles.push_back(suite.encrypt_layers(
            static_cast<Payload>(filt.lambda[idx]), {&kd}, enc2_rng));
    Rng perm2_rng = rng.substream("shuffler/perm2");
    if (opt.replay && opt.replay->rho) {
      if (opt.replay->rho->size() != singles.size())
        throw std::invalid_argument("replay: rho size mismatch");
      std::vector<LayeredCiphertext> shuffled(singles.size());
      for (size_t i = 0; i < singles.size(); ++i) shuffled[i] = singles[(*opt.replay->rho)[i]];
      singles = std::move(shuffled);
    } else {
      perm2_rng.shuffle(singles);
    }
    batch3_bits = 0.0;
    for (const auto& ct : singles) batch3_bits += suite.ciphertext_size_bits(ct);
    // Collector decrypts and counts; the sentinel is skipped (the collector
    // injected those itself).
    for (const auto& ct : singles) {
      auto res = suite.decrypt_layer(ct, kd);
      if (!res.done) throw std::logic_error("fme: single should decrypt in one peel");
      if (res.payload == crypto::kBottom) continue;
      int64_t idx = index_in_sorted(filt.lambda, static_cast<int64_t>(res.payload));
      if (idx >= 0) item_counts[static_cast<size_t>(idx)] += 1;
    }
  } else {
    for (int64_t i = 0; i < n_total; ++i) {
      if (!keep[static_cast<size_t>(i)]) continue;
      if (!hash_selected[static_cast<size_t>(msg_hash[static_cast<size_t>(i)] - 1)]) continue;
      Payload payload = msg_item[static_cast<size_t>(i)];
      if (payload == crypto::kBottom) continue;
      int64_t idx = index_in_sorted(filt.lambda, static_cast<int64_t>(payload));
      if (idx >= 0) item_counts[static_cast<size_t>(idx)] += 1;
    }
    for (size_t idx = 0; idx < z2.size(); ++idx) item_counts[idx] += z2[idx];
  }
  if (n_star > 0)
    t.send(PartyId::shuffler(), PartyId::collector(),
           batch3_bits / static_cast<double>(n_star), n_star);
  t.close();

  if (opt.post_noise_p) {
    Rng noise_rng = rng.substream("collector/noise2");
    for (auto& c : item_counts) c += dummy::two_sided_geometric(*opt.post_noise_p, noise_rng);
  }

  const double mu2 = cfg.d2.mean();
  const double denom = static_cast<double>(n_total) * cfg.beta;
  out.lambda = filt.lambda;
  out.lambda_estimates.resize(out.lambda.size());
  for (size_t idx = 0; idx < out.lambda.size(); ++idx)
    out.lambda_estimates[idx] =
        (static_cast<double>(item_counts[idx]) - mu2) / denom;
  return out;
}

ProtocolOutput proposal_star_run(const CategoricalDataset& data, const FmeConfig& cfg,
                                 double extra_eps, const hashing::HashFn& hash, Rng& rng,
                                 const FmeOptions& opt) {
  if (extra_eps <= 0.0) throw std::invalid_argument("proposal*: extra eps must be > 0");
  FmeOptions with_noise = opt;
  with_noise.post_noise_p = std::exp(-extra_eps / 4.0);
  return fme_run(data, cfg, hash, rng, with_noise);
}

// ---------------------------------------------------------------------------
// KV protocol
// ---------------------------------------------------------------------------

KvOutput kv_run(const KVDataset& data, const FmeConfig& cfg, int64_t kappa,
                const hashing::HashFn& hash, Rng& rng, const KvOptions& opt) {
  data.validate();
  if (kappa < 1) throw std::invalid_argument("kv: kappa must be >= 1");
  const int64_t d = data.d;
  const int64_t b = cfg.b;
  const bool key_level = opt.filter_level == KvFilterLevel::kKey;
  // Symbol encoding s = key + (sign > 0 ? d + kappa : 0): padding keys live in
  // (d, d + kappa] and can never collide with a genuine key's symbols.
  const int64_t sign_offset = d + kappa;
  // The hash operates on the padded key space, so the range constraint is
  // against that domain rather than the raw key count.
  cfg.validate(key_level ? sign_offset : 2 * sign_offset);
  if (hash.domain() < (key_level ? sign_offset : 2 * sign_offset))
    throw std::invalid_argument("kv: hash domain too small for padded keys");
  const int64_t n_total = data.n + static_cast<int64_t>(opt.fakes.size());
  const CipherSuite& suite = cfg.suite;

  KvOutput out;
  out.transcript = Transcript(n_total, cfg.log_mode);
  Transcript& t = out.transcript;

  Rng key_rng = rng.substream("keys");
  (void)suite.keygen(256, key_rng);
  (void)suite.keygen(256, key_rng);
  const double tau1 = suite.size_bits_for_layers(1);
  const double tau2 = suite.size_bits_for_layers(2);
  const double tau3 = suite.size_bits_for_layers(3);

  // Padding-and-sampling, then discretization, per user.
  Rng pad_rng = rng.substream("user/pad");
  std::vector<int64_t> msg_key(static_cast<size_t>(n_total));
  std::vector<int> msg_sign(static_cast<size_t>(n_total));
  for (int64_t i = 0; i < data.n; ++i) {
    const auto& rec = data.records[static_cast<size_t>(i)];
    int64_t xi = static_cast<int64_t>(rec.size());
    int64_t padded = std::max(xi, kappa);
    int64_t pick = pad_rng.uniform_int(0, padded - 1);
    int64_t key;
    double value;
    if (pick < xi) {
      key = rec[static_cast<size_t>(pick)].key;
      value = rec[static_cast<size_t>(pick)].value;
    } else {
      key = d + (pick - xi) + 1;  // dummy pair <d + j, 0>
      value = 0.0;
    }
    msg_key[static_cast<size_t>(i)] = key;
    msg_sign[static_cast<size_t>(i)] = pad_rng.bernoulli((1.0 + value) / 2.0) ? 1 : -1;
  }
  for (size_t f = 0; f < opt.fakes.size(); ++f) {
    const KvFake& fake = opt.fakes[f];
    if (fake.hash_value < 1 || fake.hash_value > b)
      throw std::invalid_argument("kv: fake hash value outside [1, b]");
    if (fake.key < 1 || fake.key > d) throw std::invalid_argument("kv: fake key outside [1, d]");
    if (fake.sign != 1 && fake.sign != -1)
      throw std::invalid_argument("kv: fake sign must be +-1");
    msg_key[static_cast<size_t>(data.n) + f] = fake.key;
    msg_sign[static_cast<size_t>(data.n) + f] = fake.sign;
  }

  auto symbol_of = [&](int64_t key, int sign) {
    return key + (sign > 0 ? sign_offset : 0);
  };
  auto hash_input = [&](int64_t sender) {
    return key_level ? msg_key[static_cast<size_t>(sender)]
                     : symbol_of(msg_key[static_cast<size_t>(sender)],
                                 msg_sign[static_cast<size_t>(sender)]);
  };
  std::vector<int64_t> msg_hash(static_cast<size_t>(n_total));
  for (int64_t i = 0; i < data.n; ++i) msg_hash[static_cast<size_t>(i)] = hash.hash(hash_input(i));
  for (size_t f = 0; f < opt.fakes.size(); ++f)
    msg_hash[static_cast<size_t>(data.n) + f] = opt.fakes[f].hash_value;

  for (int64_t i = 0; i < n_total; ++i)
    t.send(PartyId::user(i + 1), PartyId::shuffler(), tau1 + tau3, 1);

  // Round 1: sampling + dummy hash values.
  Rng sample_rng = rng.substream("shuffler/sample");
  std::vector<bool> keep = draw_keep(n_total, cfg.beta, opt.replay, sample_rng);
  Rng dummy1_rng = rng.substream("shuffler/dummy1");
  std::vector<int64_t> z1 = draw_symbol_dummies(
      b, cfg.d1, opt.replay ? opt.replay->dummies1 : std::nullopt, dummy1_rng);
  int64_t kept = 0;
  std::vector<int64_t> hash_counts(static_cast<size_t>(b), 0);
  for (int64_t i = 0; i < n_total; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    ++kept;
    hash_counts[static_cast<size_t>(msg_hash[static_cast<size_t>(i)] - 1)] += 1;
  }
  int64_t n_dummy1 = std::accumulate(z1.begin(), z1.end(), int64_t{0});
  for (int64_t v = 1; v <= b; ++v) hash_counts[static_cast<size_t>(v - 1)] += z1[static_cast<size_t>(v - 1)];
  int64_t n_tilde = kept + n_dummy1;
  if (cfg.log_mode == LogMode::kFull) {
    Rng perm_rng = rng.substream("shuffler/perm1");
    (void)perm_rng.permutation(static_cast<size_t>(n_tilde));
  }
  if (n_tilde > 0)
    t.send(PartyId::shuffler(), PartyId::collector(), tau1 + tau3, n_tilde);

  // Filtering; at key level the selected set is restricted to genuine keys.
  FilterResult filt =
      filter_items(hash_counts, cfg.alpha, cfg.d1, cfg.l, hash, key_level ? d : 2 * sign_offset);
  out.z_th = filt.z_th;
  std::vector<bool> hash_selected(static_cast<size_t>(b), false);
  for (int64_t v : filt.lambda_hashes) hash_selected[static_cast<size_t>(v - 1)] = true;

  std::vector<int64_t> lambda_keys;
  if (key_level) {
    lambda_keys = filt.lambda;  // already restricted to [1, d]
  } else {
    // Pair-level ablation: a key is reported when either of its symbols was
    // selected.
    for (int64_t s : filt.lambda) {
      int64_t key = s > sign_offset ? s - sign_offset : s;
      if (key >= 1 && key <= d) lambda_keys.push_back(key);
    }
    std::sort(lambda_keys.begin(), lambda_keys.end());
    lambda_keys.erase(std::unique(lambda_keys.begin(), lambda_keys.end()), lambda_keys.end());
  }

  if (n_tilde > 0)
    t.send(PartyId::collector(), PartyId::shuffler(), tau2, n_tilde);
  if (!filt.lambda.empty())
    t.send(PartyId::collector(), PartyId::shuffler(),
           lambda_element_bits(key_level ? d : 2 * sign_offset) *
               static_cast<double>(filt.lambda.size()),
           1);

  // Round 2: per selected key, D2 dummies for both signs (key level); the
  // pair-level ablation draws one D2 count per selected symbol.
  Rng dummy2_rng = rng.substream("shuffler/dummy2");
  std::vector<int64_t> plus_counts(lambda_keys.size(), 0);
  std::vector<int64_t> minus_counts(lambda_keys.size(), 0);
  std::vector<bool> plus_selected(lambda_keys.size(), key_level);
  std::vector<bool> minus_selected(lambda_keys.size(), key_level);
  int64_t n_dummy2 = 0;
  if (key_level) {
    for (size_t idx = 0; idx < lambda_keys.size(); ++idx) {
      int64_t zp, zm;
      if (opt.replay && opt.replay->dummies2) {
        auto it = opt.replay->dummies2->find(lambda_keys[idx]);
        zp = zm = it == opt.replay->dummies2->end() ? 0 : it->second;
      } else {
        zp = cfg.d2.sample(dummy2_rng);
        zm = cfg.d2.sample(dummy2_rng);
      }
      plus_counts[idx] += zp;
      minus_counts[idx] += zm;
      n_dummy2 += zp + zm;
    }
  } else {
    for (size_t idx = 0; idx < lambda_keys.size(); ++idx) {
      int64_t key = lambda_keys[idx];
      if (std::binary_search(filt.lambda.begin(), filt.lambda.end(), symbol_of(key, 1))) {
        plus_selected[idx] = true;
        int64_t z = cfg.d2.sample(dummy2_rng);
        plus_counts[idx] += z;
        n_dummy2 += z;
      }
      if (std::binary_search(filt.lambda.begin(), filt.lambda.end(), symbol_of(key, -1))) {
        minus_selected[idx] = true;
        int64_t z = cfg.d2.sample(dummy2_rng);
        minus_counts[idx] += z;
        n_dummy2 += z;
      }
    }
  }

  // Kept genuine/fake messages surviving the hash filter contribute to the
  // per-(key, sign) counts; everything else was replaced with the sentinel.
  for (int64_t i = 0; i < n_total; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    if (!hash_selected[static_cast<size_t>(msg_hash[static_cast<size_t>(i)] - 1)]) continue;
    int64_t key = msg_key[static_cast<size_t>(i)];
    if (key < 1 || key > d) continue;  // padding pair
    if (!key_level &&
        !std::binary_search(filt.lambda.begin(), filt.lambda.end(),
                            symbol_of(key, msg_sign[static_cast<size_t>(i)])))
      continue;
    int64_t idx = index_in_sorted(lambda_keys, key);
    if (idx < 0) continue;
    if (msg_sign[static_cast<size_t>(i)] > 0)
      plus_counts[static_cast<size_t>(idx)] += 1;
    else
      minus_counts[static_cast<size_t>(idx)] += 1;
  }

  int64_t n_star = kept + n_dummy2;
  if (cfg.log_mode == LogMode::kFull) {
    Rng perm2_rng = rng.substream("shuffler/perm2");
    (void)perm2_rng.permutation(static_cast<size_t>(n_star));
  }
  if (n_star > 0) t.send(PartyId::shuffler(), PartyId::collector(), tau1, n_star);
  t.close();

  const double mu2 = cfg.d2.mean();
  const double scale = static_cast<double>(kappa) / (static_cast<double>(n_total) * cfg.beta);
  out.lambda = lambda_keys;
  out.phi.resize(lambda_keys.size());
  out.psi.resize(lambda_keys.size());
  out.degenerate.assign(lambda_keys.size(), false);
  for (size_t idx = 0; idx < lambda_keys.size(); ++idx) {
    double cp = static_cast<double>(plus_counts[idx]) - (plus_selected[idx] ? mu2 : 0.0);
    double cm = static_cast<double>(minus_counts[idx]) - (minus_selected[idx] ? mu2 : 0.0);
    double phi_hat = scale * (cp + cm);
    out.phi[idx] = phi_hat;
    if (phi_hat <= 0.0) {
      // Degenerate division guard; the mean estimate is reported as 0.
      out.psi[idx] = 0.0;
      out.degenerate[idx] = true;
    } else {
      out.psi[idx] = scale * (cp - cm) / phi_hat;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pure-shuffle GRR baseline
// ---------------------------------------------------------------------------

ProtocolOutput pure_grr_run(const CategoricalDataset& data, double eps0,
                            const CipherSuite& suite, Rng& rng, LogMode log_mode,
                            const std::vector<int64_t>& fake_items) {
  data.validate();
  if (eps0 <= 0.0) throw std::invalid_argument("grr: eps0 must be > 0");
  const int64_t d = data.d;
  const int64_t n_total = data.n + static_cast<int64_t>(fake_items.size());

  ProtocolOutput out;
  out.transcript = Transcript(n_total, log_mode);
  Transcript& t = out.transcript;
  const double tau1 = suite.size_bits_for_layers(1);

  const double e_eps = std::exp(eps0);
  const double p_keep = e_eps / (e_eps + static_cast<double>(d) - 1.0);
  Rng user_rng = rng.substream("user/grr");
  std::vector<int64_t> counts(static_cast<size_t>(d), 0);
  for (int64_t i = 0; i < data.n; ++i) {
    int64_t x = data.values[static_cast<size_t>(i)];
    int64_t y;
    if (user_rng.bernoulli(p_keep)) {
      y = x;
    } else {
      // Uniform over the other d-1 items.
      y = user_rng.uniform_int(1, d - 1);
      if (y >= x) ++y;
    }
    counts[static_cast<size_t>(y - 1)] += 1;
    t.send(PartyId::user(i + 1), PartyId::shuffler(), tau1, 1);
  }
  // Output-poisoning fakes send their message directly, no randomizer.
  for (size_t f = 0; f < fake_items.size(); ++f) {
    counts[static_cast<size_t>(fake_items[f] - 1)] += 1;
    t.send(PartyId::user(data.n + static_cast<int64_t>(f) + 1), PartyId::shuffler(), tau1, 1);
  }
  if (log_mode == LogMode::kFull) {
    Rng perm_rng = rng.substream("shuffler/perm");
    (void)perm_rng.permutation(static_cast<size_t>(n_total));
  }
  t.send(PartyId::shuffler(), PartyId::collector(), tau1, n_total);
  t.close();

  const double q = 1.0 / (e_eps + static_cast<double>(d) - 1.0);
  out.dense.resize(static_cast<size_t>(d));
  for (int64_t i = 0; i < d; ++i) {
    double freq = static_cast<double>(counts[static_cast<size_t>(i)]) / static_cast<double>(n_total);
    out.dense[static_cast<size_t>(i)] = (freq - q) / (p_keep - q);
  }
  return out;
}

}  // namespace ashdp::protocols
