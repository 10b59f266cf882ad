#pragma once

#include <cstdint>
#include <vector>

#include "ashdp/analysis.hpp"
#include "ashdp/dataset.hpp"
#include "ashdp/protocols.hpp"

namespace ashdp::attacks {

struct CollusionScenario {
  int64_t n = 0;             // genuine users
  int64_t omega = 0;         // colluding users (victim excluded by convention)
  double target_eps = 0.0;   // epsilon configured with no collusion
  double delta = 1e-12;
};

// Realized epsilon under collusion. Pure-shuffle baselines lose the colluders
// from the shuffled crowd: eps0 is recovered from the target by inverting the
// amplification bound, then re-amplified over n - omega reports. Augmented
// protocols are unaffected.
double actual_epsilon(analysis::ProtocolKind kind, const CollusionScenario& scenario);

struct PoisoningScenario {
  std::vector<int64_t> targets;  // in [1, d]
  int64_t n_fake = 0;
  double lambda() const;         // n' / (n + n'), set by the harness
  int64_t n_genuine = 0;
};

struct GainEstimate {
  double empirical = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;
};

struct KvGainEstimate {
  GainEstimate phi;
  GainEstimate psi;
};

// Categorical maximal-gain attack. Fakes send gain-optimal messages:
// LNF/FME a target item (with its consistent hash), CH a hash value covering
// the targets. Paired runs (with and without fakes) share the genuine-side
// randomness; eta for the FME analytic gain is estimated from the clean runs.
GainEstimate mga_lnf(const CategoricalDataset& data, const PoisoningScenario& scenario,
                     const dummy::DummyCountDistribution& dist, double beta,
                     const crypto::CipherSuite& suite, int64_t trials, Rng& rng);

GainEstimate mga_fme(const CategoricalDataset& data, const PoisoningScenario& scenario,
                     const protocols::FmeConfig& cfg, const hashing::HashFn& hash,
                     int64_t trials, Rng& rng);

// `colliding` selects the attacker that found one hash value covering all
// targets (requires the targets to actually collide under `hash`); otherwise
// the single-target variant is run and the analytic gain is the LNF form.
GainEstimate mga_ch(const CategoricalDataset& data, const PoisoningScenario& scenario,
                    const dummy::DummyCountDistribution& dist, double beta,
                    const hashing::HashFn& hash, const crypto::CipherSuite& suite,
                    bool colliding, int64_t trials, Rng& rng);

// KV maximal-gain attack: each fake sends <random target, +1> and its hash.
KvGainEstimate m2ga_kv(const KVDataset& data, const PoisoningScenario& scenario,
                       const protocols::FmeConfig& cfg, int64_t kappa,
                       const hashing::HashFn& hash, int64_t trials, Rng& rng);

// Fraction of trials in which each target missed the selected set (no fakes).
std::vector<double> estimate_eta(const CategoricalDataset& data,
                                 const protocols::FmeConfig& cfg,
                                 const hashing::HashFn& hash,
                                 const std::vector<int64_t>& targets, int64_t trials,
                                 Rng& rng);

std::vector<double> estimate_eta_kv(const KVDataset& data, const protocols::FmeConfig& cfg,
                                    int64_t kappa, const hashing::HashFn& hash,
                                    const std::vector<int64_t>& targets, int64_t trials,
                                    Rng& rng);

}  // namespace ashdp::attacks
