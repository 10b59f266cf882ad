#include "ashdp/attacks.hpp"

#include <cmath>
#include <stdexcept>

namespace ashdp::attacks {

namespace {

using analysis::ProtocolKind;

struct RunningStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  int64_t count = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
  double std_error() const {
    double m = mean();
    double var = sum_sq / static_cast<double>(count) - m * m;
    return std::sqrt(std::max(0.0, var) / static_cast<double>(count));
  }
};

double target_sum(const protocols::ProtocolOutput& out, const std::vector<int64_t>& targets) {
  double acc = 0.0;
  for (int64_t t : targets) acc += out.estimate_for(t);
  return acc;
}

}  // namespace

double PoisoningScenario::lambda() const {
  return static_cast<double>(n_fake) / static_cast<double>(n_genuine + n_fake);
}

double actual_epsilon(ProtocolKind kind, const CollusionScenario& s) {
  if (s.omega < 0 || s.omega >= s.n)
    throw std::invalid_argument("actual_epsilon: omega must be in [0, n)");
  if (kind != ProtocolKind::kPureGrr) return s.target_eps;
  if (s.omega == 0) return s.target_eps;
  double eps0 = analysis::invert_amplify(s.target_eps, static_cast<double>(s.n), s.delta);
  return analysis::amplify(eps0, static_cast<double>(s.n - s.omega), s.delta);
}

GainEstimate mga_lnf(const CategoricalDataset& data, const PoisoningScenario& scenario,
                     const dummy::DummyCountDistribution& dist, double beta,
                     const crypto::CipherSuite& suite, int64_t trials, Rng& rng) {
  if (scenario.targets.empty()) throw std::invalid_argument("mga: empty target set");
  FrequencyVector truth = true_frequencies(data);
  double f_t = 0.0;
  for (int64_t t : scenario.targets) f_t += truth.entries[static_cast<size_t>(t - 1)];

  // Round-robin target assignment is gain-optimal (any assignment is).
  std::vector<int64_t> fake_items(static_cast<size_t>(scenario.n_fake));
  for (size_t f = 0; f < fake_items.size(); ++f)
    fake_items[f] = scenario.targets[f % scenario.targets.size()];

  RunningStats stats;
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng clean_rng = rng.substream("mga/clean", static_cast<uint64_t>(trial));
    Rng attack_rng = rng.substream("mga/clean", static_cast<uint64_t>(trial));
    protocols::LnfOptions clean_opt;
    clean_opt.log_mode = transport::LogMode::kCounters;
    protocols::LnfOptions attack_opt = clean_opt;
    attack_opt.fake_items = fake_items;
    auto clean = protocols::lnf_run(data, dist, beta, suite, clean_rng, clean_opt);
    auto poisoned = protocols::lnf_run(data, dist, beta, suite, attack_rng, attack_opt);
    stats.add(target_sum(poisoned, scenario.targets) - target_sum(clean, scenario.targets));
  }
  GainEstimate out;
  out.empirical = stats.mean();
  out.std_error = stats.std_error();
  out.analytic = analysis::gain_categorical(ProtocolKind::kLnf, scenario.lambda(), f_t,
                                            static_cast<int64_t>(scenario.targets.size()));
  return out;
}

std::vector<double> estimate_eta(const CategoricalDataset& data,
                                 const protocols::FmeConfig& cfg,
                                 const hashing::HashFn& hash,
                                 const std::vector<int64_t>& targets, int64_t trials,
                                 Rng& rng) {
  std::vector<int64_t> missed(targets.size(), 0);
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng r = rng.substream("eta", static_cast<uint64_t>(trial));
    auto out = protocols::fme_run(data, cfg, hash, r);
    for (size_t i = 0; i < targets.size(); ++i)
      if (!out.selected(targets[i])) missed[i] += 1;
  }
  std::vector<double> eta(targets.size());
  for (size_t i = 0; i < targets.size(); ++i)
    eta[i] = static_cast<double>(missed[i]) / static_cast<double>(trials);
  return eta;
}

std::vector<double> estimate_eta_kv(const KVDataset& data, const protocols::FmeConfig& cfg,
                                    int64_t kappa, const hashing::HashFn& hash,
                                    const std::vector<int64_t>& targets, int64_t trials,
                                    Rng& rng) {
  std::vector<int64_t> missed(targets.size(), 0);
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng r = rng.substream("eta", static_cast<uint64_t>(trial));
    auto out = protocols::kv_run(data, cfg, kappa, hash, r);
    for (size_t i = 0; i < targets.size(); ++i)
      if (!out.selected(targets[i])) missed[i] += 1;
  }
  std::vector<double> eta(targets.size());
  for (size_t i = 0; i < targets.size(); ++i)
    eta[i] = static_cast<double>(missed[i]) / static_cast<double>(trials);
  return eta;
}

GainEstimate mga_fme(const CategoricalDataset& data, const PoisoningScenario& scenario,
                     const protocols::FmeConfig& cfg, const hashing::HashFn& hash,
                     int64_t trials, Rng& rng) {
  if (scenario.targets.empty()) throw std::invalid_argument("mga: empty target set");
  FrequencyVector truth = true_frequencies(data);
  double f_t = 0.0;
  for (int64_t t : scenario.targets) f_t += truth.entries[static_cast<size_t>(t - 1)];

  // Gain-optimal consistent pairs <h(t), t>, round-robin over targets.
  std::vector<protocols::FmeFake> fakes(static_cast<size_t>(scenario.n_fake));
  for (size_t f = 0; f < fakes.size(); ++f) {
    int64_t t = scenario.targets[f % scenario.targets.size()];
    fakes[f] = {hash.hash(t), t};
  }

  Rng eta_rng = rng.substream("mga/eta");
  std::vector<double> eta =
      estimate_eta(data, cfg, hash, scenario.targets, trials, eta_rng);
  double sum_eta_f = 0.0;
  for (size_t i = 0; i < eta.size(); ++i)
    sum_eta_f += eta[i] * truth.entries[static_cast<size_t>(scenario.targets[i] - 1)];

  RunningStats stats;
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng clean_rng = rng.substream("mga/run", static_cast<uint64_t>(trial));
    Rng attack_rng = rng.substream("mga/run", static_cast<uint64_t>(trial));
    protocols::FmeOptions attack_opt;
    attack_opt.fakes = fakes;
    auto clean = protocols::fme_run(data, cfg, hash, clean_rng);
    auto poisoned = protocols::fme_run(data, cfg, hash, attack_rng, attack_opt);
    stats.add(target_sum(poisoned, scenario.targets) - target_sum(clean, scenario.targets));
  }
  GainEstimate out;
  out.empirical = stats.mean();
  out.std_error = stats.std_error();
  out.analytic = analysis::gain_categorical(ProtocolKind::kFme, scenario.lambda(), f_t,
                                            static_cast<int64_t>(scenario.targets.size()),
                                            sum_eta_f);
  return out;
}

GainEstimate mga_ch(const CategoricalDataset& data, const PoisoningScenario& scenario,
                    const dummy::DummyCountDistribution& dist, double beta,
                    const hashing::HashFn& hash, const crypto::CipherSuite& suite,
                    bool colliding, int64_t trials, Rng& rng) {
  if (scenario.targets.empty()) throw std::invalid_argument("mga: empty target set");
  FrequencyVector truth = true_frequencies(data);
  double f_t = 0.0;
  for (int64_t t : scenario.targets) f_t += truth.entries[static_cast<size_t>(t - 1)];

  int64_t m_star = hash.hash(scenario.targets.front());
  if (colliding) {
    for (int64_t t : scenario.targets)
      if (hash.hash(t) != m_star)
        throw std::invalid_argument("mga_ch: targets do not collide under this hash");
  }
  std::vector<int64_t> fake_hashes(static_cast<size_t>(scenario.n_fake), m_star);

  RunningStats stats;
  for (int64_t trial = 0; trial < trials; ++trial) {
    Rng clean_rng = rng.substream("mga/run", static_cast<uint64_t>(trial));
    Rng attack_rng = rng.substream("mga/run", static_cast<uint64_t>(trial));
    protocols::ChOptions clean_opt;
    clean_opt.log_mode = transport::LogMode::kCounters;
    protocols::ChOptions attack_opt = clean_opt;
    attack_opt.fake_hash_values = fake_hashes;
    auto clean = protocols::ch_run(data, dist, beta, hash, suite, clean_rng, clean_opt);
    auto poisoned = protocols::ch_run(data, dist, beta, hash, suite, attack_rng, attack_opt);
    stats.add(target_sum(poisoned, scenario.targets) - target_sum(clean, scenario.targets));
  }
  GainEstimate out;
  out.empirical = stats.mean();
  out.std_error = stats.std_error();
  out.analytic = colliding
                     ? analysis::gain_categorical(ProtocolKind::kCh, scenario.lambda(), f_t,
                                                  static_cast<int64_t>(scenario.targets.size()))
                     : analysis::gain_categorical(ProtocolKind::kLnf, scenario.lambda(), f_t,
                                                  static_cast<int64_t>(scenario.targets.size()));
  return out;
}

KvGainEstimate m2ga_kv(const KVDataset& data, const PoisoningScenario& scenario,
                       const protocols::FmeConfig& cfg, int64_t kappa,
                       const hashing::HashFn& hash, int64_t trials, Rng& rng) {
  if (scenario.targets.empty()) throw std::invalid_argument("m2ga: empty target set");
  KvStatistics truth = true_kv_statistics(data);

  Rng eta_rng = rng.substream("m2ga/eta");
  std::vector<double> eta =
      estimate_eta_kv(data, cfg, kappa, hash, scenario.targets, trials, eta_rng);

  RunningStats stats_phi, stats_psi;
  Rng assign_rng = rng.substream("m2ga/assign");
  for (int64_t trial = 0; trial < trials; ++trial) {
    // Each fake picks a random target and sends <target, +1> with its hash.
    std::vector<protocols::KvFake> fakes(static_cast<size_t>(scenario.n_fake));
    for (auto& fake : fakes) {
      int64_t t = scenario.targets[static_cast<size_t>(
          assign_rng.uniform_u64(scenario.targets.size()))];
      fake = {hash.hash(t), t, +1};
    }
    Rng clean_rng = rng.substream("m2ga/run", static_cast<uint64_t>(trial));
    Rng attack_rng = rng.substream("m2ga/run", static_cast<uint64_t>(trial));
    protocols::KvOptions attack_opt;
    attack_opt.fakes = fakes;
    auto clean = protocols::kv_run(data, cfg, kappa, hash, clean_rng);
    auto poisoned = protocols::kv_run(data, cfg, kappa, hash, attack_rng, attack_opt);
    double dphi = 0.0, dpsi = 0.0;
    for (int64_t t : scenario.targets) {
      dphi += poisoned.phi_for(t) - clean.phi_for(t);
      dpsi += poisoned.psi_for(t) - clean.psi_for(t);
    }
    stats_phi.add(dphi);
    stats_psi.add(dpsi);
  }
  auto analytic = analysis::kv_gains_general(data, scenario.targets, scenario.n_fake,
                                             kappa, eta);
  KvGainEstimate out;
  out.phi.empirical = stats_phi.mean();
  out.phi.std_error = stats_phi.std_error();
  out.phi.analytic = analytic.g_phi;
  out.psi.empirical = stats_psi.mean();
  out.psi.std_error = stats_psi.std_error();
  out.psi.analytic = analytic.g_psi;
  return out;
}

}  // namespace ashdp::attacks
