#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "ashdp/crypto.hpp"
#include "ashdp/dataset.hpp"
#include "ashdp/dummy.hpp"
#include "ashdp/hashing.hpp"
#include "ashdp/rng.hpp"
#include "ashdp/transport.hpp"

namespace ashdp::protocols {

// Scripted randomness for replaying a run step by step: any field left unset
// falls back to the rng stream of that stage.
struct ReplayScript {
  std::optional<std::vector<bool>> keep;              // per-user sampling decisions
  std::optional<std::vector<int64_t>> dummies1;       // per symbol (item or hash value)
  std::optional<std::vector<uint32_t>> pi;            // first shuffle
  std::optional<std::map<int64_t, int64_t>> dummies2; // per selected item
  std::optional<std::vector<uint32_t>> rho;           // second shuffle
};

struct ProtocolOutput {
  bool sparse = false;
  std::vector<double> dense;             // size d when !sparse
  std::vector<int64_t> lambda;           // selected items, sorted (sparse only)
  std::vector<double> lambda_estimates;  // aligned with lambda
  int64_t z_th = -1;                     // filtering threshold, -1 when unused
  transport::Transcript transcript{0};

  // Unreported items read as 0.
  double estimate_for(int64_t item) const;
  bool selected(int64_t item) const;
};

struct LnfOptions {
  transport::LogMode log_mode = transport::LogMode::kFull;
  const ReplayScript* replay = nullptr;
  std::vector<int64_t> fake_items;  // messages injected by fake users
};

// Local-noise-free protocol: shuffler samples with prob beta, adds z_i ~ D
// dummies per item, shuffles; collector counts and debiases all d items.
ProtocolOutput lnf_run(const CategoricalDataset& data,
                       const dummy::DummyCountDistribution& dist, double beta,
                       const crypto::CipherSuite& suite, Rng& rng,
                       const LnfOptions& opt = {});

struct ChOptions {
  transport::LogMode log_mode = transport::LogMode::kFull;
  const ReplayScript* replay = nullptr;
  std::vector<int64_t> fake_hash_values;  // output poisoning at hash level
};

// Common-hash protocol: LNF over hashed values with collision debiasing.
ProtocolOutput ch_run(const CategoricalDataset& data,
                      const dummy::DummyCountDistribution& dist, double beta,
                      const hashing::HashFn& hash, const crypto::CipherSuite& suite,
                      Rng& rng, const ChOptions& opt = {});

using HashFactory =
    std::function<std::unique_ptr<hashing::HashFn>(int64_t group, Rng& rng)>;

// Group-dependent hash protocol; g = 1 coincides with CH, g = n assigns each
// user her own hash. Dummies are drawn per (group, hash value) pair.
ProtocolOutput gh_run(const CategoricalDataset& data,
                      const dummy::DummyCountDistribution& dist, double beta, int64_t g,
                      int64_t b, const crypto::CipherSuite& suite, Rng& rng,
                      const HashFactory& factory = {},
                      transport::LogMode log_mode = transport::LogMode::kFull);

struct FilterResult {
  std::vector<int64_t> lambda_hashes;  // selected hash values, sorted
  std::vector<int64_t> lambda;         // union of preimages, sorted
  int64_t z_th = 0;
};

// Threshold at the alpha upper tail of D1, cap at the l largest counts
// (ties: smaller hash value wins), then expand through preimages.
FilterResult filter_items(const std::vector<int64_t>& hash_counts, double alpha,
                          const dummy::DummyCountDistribution& d1, int64_t l,
                          const hashing::HashFn& hash, int64_t item_limit);

struct FmeConfig {
  std::optional<dummy::PrivacyBudget> budget;  // when set, dists must certify
  dummy::DummyCountDistribution d1 = dummy::DummyCountDistribution::point_mass(0);
  dummy::DummyCountDistribution d2 = dummy::DummyCountDistribution::point_mass(0);
  double beta = 1.0;
  double alpha = 0.05;
  int64_t l = 0;
  int64_t b = 0;
  crypto::CipherSuite suite = crypto::CipherSuite::mock();
  transport::LogMode log_mode = transport::LogMode::kFull;

  void validate(int64_t d) const;
};

// Builds a config from a budget: D1 calibrated at (eps1/2, delta1/2) with
// beta, D2 at (eps2/2, delta2/2) with beta = 1.
FmeConfig make_fme_config(const dummy::PrivacyBudget& budget, double beta, double alpha,
                          int64_t l, int64_t b, crypto::CipherSuite suite);

struct FmeFake {
  int64_t hash_value = 0;  // in [1, b]
  int64_t item = 0;        // in [1, d], or 0 for the unselected sentinel
};

struct FmeOptions {
  const ReplayScript* replay = nullptr;
  std::vector<FmeFake> fakes;
  // Two-sided geometric post-noise parameter (the Proposal* variant); unset
  // means no added noise.
  std::optional<double> post_noise_p;
};

// Filtering-with-multiple-encryption protocol. One user round: each user
// sends <E[h(x)], E[E[E[x]]]> once; the shuffler and collector exchange the
// two augmented-shuffle stages described by the config.
ProtocolOutput fme_run(const CategoricalDataset& data, const FmeConfig& cfg,
                       const hashing::HashFn& hash, Rng& rng,
                       const FmeOptions& opt = {});

// FME with independent Geo(e^(-extra_eps/4)) noise added to each hash count
// before filtering and to each selected item count before estimation.
ProtocolOutput proposal_star_run(const CategoricalDataset& data, const FmeConfig& cfg,
                                 double extra_eps, const hashing::HashFn& hash, Rng& rng,
                                 const FmeOptions& opt = {});

enum class KvFilterLevel { kKey, kPair };

struct KvFake {
  int64_t hash_value = 0;
  int64_t key = 0;
  int sign = 1;  // +1 or -1
};

struct KvOptions {
  const ReplayScript* replay = nullptr;
  std::vector<KvFake> fakes;
  KvFilterLevel filter_level = KvFilterLevel::kKey;
};

struct KvOutput {
  std::vector<int64_t> lambda;  // selected keys, sorted
  std::vector<double> phi;      // aligned with lambda
  std::vector<double> psi;
  std::vector<bool> degenerate;  // phi <= 0 for a selected key; psi forced to 0
  int64_t z_th = -1;
  transport::Transcript transcript{0};

  double phi_for(int64_t key) const;  // 0 when unselected
  double psi_for(int64_t key) const;  // 1 when unselected
  bool selected(int64_t key) const;
};

// KV protocol: padding-and-sampling to one discretized pair per user, then
// the FME flow filtering at key level, with per-(key, sign) D2 dummies.
// The hash domain must cover [1, d + kappa]; padding keys hash wherever the
// family puts them but never enter the selected set. filter_level == kPair
// is the ablation that hashes the transformed symbol instead of the key.
KvOutput kv_run(const KVDataset& data, const FmeConfig& cfg, int64_t kappa,
                const hashing::HashFn& hash, Rng& rng, const KvOptions& opt = {});

// Pure-shuffle baseline: generalized random response at eps0, shuffle only.
ProtocolOutput pure_grr_run(const CategoricalDataset& data, double eps0,
                            const crypto::CipherSuite& suite, Rng& rng,
                            transport::LogMode log_mode = transport::LogMode::kFull,
                            const std::vector<int64_t>& fake_items = {});

}  // namespace ashdp::protocols
