// ashdp: simulation and analysis tool for augmented shuffle DP protocols.
//
// Subcommands: run, sweep, attack, calibrate, certify, predict, replay.
// Configuration is JSON (see README); individual flags override config keys.
// Exit codes: 0 success, 2 config error, 3 calibration infeasible,
// 4 dataset error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ashdp/analysis.hpp"
#include "ashdp/attacks.hpp"
#include "ashdp/dataset.hpp"
#include "ashdp/dummy.hpp"
#include "ashdp/hashing.hpp"
#include "ashdp/protocols.hpp"

using nlohmann::json;
using namespace ashdp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitDataset = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

uint64_t config_hash(const json& j) {
  std::string s = j.dump();
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// Config assembly
// ---------------------------------------------------------------------------

struct Experiment {
  json config;
  std::string protocol = "fme";
  // Categorical or KV dataset; exactly one is set.
  std::optional<CategoricalDataset> cat;
  std::optional<KVDataset> kv;
  dummy::PrivacyBudget budget = dummy::PrivacyBudget::split(1.0, 1e-12, 0.5);
  double beta = 1.0;
  double alpha = 0.05;
  int64_t l = 0;  // 0: policy default
  int64_t b = 0;  // 0: optimizer default
  int64_t l_constant = 50;
  int64_t kappa = 1;
  double user_sampling = 1.0;
  int64_t trials = 10;
  uint64_t seed = 1;
  int64_t topk = 50;
  crypto::CipherSuite suite = crypto::CipherSuite::mock();

  int64_t domain() const { return cat ? cat->d : kv->d; }
  int64_t users() const { return cat ? cat->n : kv->n; }
};

CategoricalDataset make_categorical(const json& spec) {
  std::string kind = spec.value("kind", "zipf");
  if (kind == "zipf") {
    return synth_zipf(spec.value("n", int64_t{1000}), spec.value("d", int64_t{100}),
                      spec.value("exponent", 1.0), spec.value("seed", uint64_t{1}));
  }
  if (kind == "file")
    return load_categorical_csv(spec.at("path").get<std::string>(),
                                spec.value("d", int64_t{0}));
  throw ConfigError("unknown categorical dataset kind '" + kind + "'");
}

KVDataset make_kv(const json& spec) {
  std::string kind = spec.value("kind", "kv_synth");
  if (kind == "kv_synth") {
    json pairs = spec.value("pairs", json{{"law", "fixed"}, {"k", 1}});
    PairsPerUserLaw law = pairs.value("law", "fixed") == std::string("uniform")
                              ? PairsPerUserLaw::uniform(pairs.value("k", int64_t{1}))
                              : PairsPerUserLaw::fixed(pairs.value("k", int64_t{1}));
    std::string values = spec.value("values", "uniform");
    ValueLaw vlaw = values == "signs"      ? ValueLaw::signs()
                    : values == "keyconst" ? ValueLaw::key_const()
                                           : ValueLaw::uniform();
    return synth_kv(spec.value("n", int64_t{1000}), spec.value("d", int64_t{100}), law,
                    vlaw, spec.value("seed", uint64_t{1}));
  }
  if (kind == "file")
    return load_kv_csv(spec.at("path").get<std::string>(), spec.value("d", int64_t{0}));
  throw ConfigError("unknown kv dataset kind '" + kind + "'");
}

crypto::CipherSuite make_suite(const json& cfg) {
  std::string cipher = cfg.value("cipher", "mock");
  if (cipher == "real") return crypto::CipherSuite::ecies();
  if (cipher != "mock") throw ConfigError("cipher must be 'mock' or 'real'");
  crypto::SizeModel model;
  if (cfg.contains("tau")) {
    auto tau = cfg.at("tau");
    if (!tau.is_array() || tau.size() != 3) throw ConfigError("tau must be [t1, t2, t3]");
    model.tau1 = tau[0].get<double>();
    model.tau2 = tau[1].get<double>();
    model.tau3 = tau[2].get<double>();
  }
  return crypto::CipherSuite::mock(model);
}

Experiment build_experiment(const json& cfg) {
  Experiment ex;
  ex.config = cfg;
  ex.protocol = cfg.value("protocol", "fme");
  json dataset = cfg.value("dataset", json{{"kind", "zipf"}});
  bool kv_protocol = ex.protocol == "kv";
  std::string dkind = dataset.value("kind", kv_protocol ? "kv_synth" : "zipf");
  bool is_kv_data = dkind == "kv_synth" ||
                    (dkind == "file" && dataset.value("type", "categorical") == "kv");
  if (kv_protocol != is_kv_data)
    throw ConfigError("protocol/dataset mismatch: kv protocol needs kv data");
  if (is_kv_data)
    ex.kv = make_kv(dataset);
  else
    ex.cat = make_categorical(dataset);

  json budget = cfg.value("budget", json::object());
  ex.budget = dummy::PrivacyBudget::split(budget.value("eps", 1.0),
                                          budget.value("delta", 1e-12),
                                          budget.value("split", 0.5));
  ex.beta = cfg.value("beta", 1.0);
  ex.alpha = cfg.value("alpha", 0.05);
  ex.l = cfg.value("l", int64_t{0});
  ex.b = cfg.value("b", int64_t{0});
  ex.l_constant = cfg.value("l_constant", int64_t{50});
  ex.kappa = cfg.value("kappa", int64_t{1});
  ex.user_sampling = cfg.value("user_sampling", 1.0);
  ex.trials = cfg.value("trials", int64_t{10});
  ex.seed = cfg.value("seed", uint64_t{1});
  ex.topk = cfg.value("topk", int64_t{50});
  ex.suite = make_suite(cfg);
  return ex;
}

// Calibrated distributions plus the optimizer-driven l and b.
protocols::FmeConfig assemble_fme(const Experiment& ex, double eps_override = 0.0) {
  dummy::PrivacyBudget budget = ex.budget;
  if (eps_override > 0.0)
    budget = dummy::PrivacyBudget::split(
        eps_override, ex.budget.delta,
        ex.budget.part1 ? ex.budget.part1->first / ex.budget.eps : 0.5);
  protocols::FmeConfig cfg =
      protocols::make_fme_config(budget, ex.beta, ex.alpha, 1, 2, ex.suite);
  int64_t d = ex.domain();
  int64_t l = ex.l > 0 ? ex.l : analysis::l_policy(ex.users(), d, ex.l_constant);
  l = std::min(l, d);
  int64_t b = ex.b;
  if (b <= 0) {
    analysis::PredictorInput in;
    in.n = static_cast<double>(ex.users());
    in.d = static_cast<double>(d);
    in.beta = ex.beta;
    in.alpha = ex.alpha;
    in.l = static_cast<double>(l);
    in.mu1 = cfg.d1.mean();
    in.mu2 = cfg.d2.mean();
    in.tau1 = ex.suite.size_model().tau1;
    in.tau2 = ex.suite.size_model().tau2;
    in.tau3 = ex.suite.size_model().tau3;
    double b_star = l >= static_cast<int64_t>(ex.beta * static_cast<double>(ex.users()))
                        ? analysis::optimal_b(in, analysis::BRegime::kFullL)
                        : analysis::optimal_b(in, analysis::BRegime::kSmallL);
    b = static_cast<int64_t>(std::llround(b_star));
  }
  b = std::clamp<int64_t>(b, 2, d);
  l = std::min(l, b);
  cfg.l = l;
  cfg.b = b;
  cfg.log_mode = transport::LogMode::kCounters;
  cfg.validate(d);
  return cfg;
}

dummy::DummyCountDistribution dist_from_json(const json& spec) {
  std::string kind = spec.value("kind", "ageom");
  if (kind == "binomial")
    return dummy::DummyCountDistribution::binomial(spec.value("m", int64_t{2}),
                                                   spec.value("p", 0.5));
  if (kind == "point")
    return dummy::DummyCountDistribution::point_mass(spec.value("k", int64_t{0}));
  if (kind == "ageom")
    return dummy::DummyCountDistribution::asymmetric_geometric(
        spec.value("decay", std::exp(-0.5)), spec.value("offset", int64_t{0}),
        spec.value("two_sided", true));
  throw ConfigError("unknown distribution kind '" + kind + "'");
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void write_manifest(const std::string& out_dir, const json& cfg) {
  json manifest;
  manifest["config"] = cfg;
  manifest["config_hash"] = config_hash(cfg);
  manifest["format_version"] = 1;
  write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::string csv_header(const json& cfg, const std::string& columns) {
  return "# config_hash=" + std::to_string(config_hash(cfg)) + "\n" + columns + "\n";
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

int cmd_run(const Experiment& ex, const std::string& out_dir) {
  Rng root(ex.seed);
  json result;
  if (ex.protocol == "kv") {
    KVDataset data = *ex.kv;
    if (ex.user_sampling < 1.0) {
      Rng s = root.substream("user_sample");
      data = user_sample(data, ex.user_sampling, s);
    }
    auto truth = true_kv_statistics(*ex.kv);
    auto cfg = assemble_fme(ex);
    Rng hash_rng = root.substream("hash");
    hashing::AffineHash hash(
        hashing::sample_hash(data.d + ex.kappa, cfg.b, hash_rng));
    Rng run_rng = root.substream("run");
    auto out = protocols::kv_run(data, cfg, ex.kappa, hash, run_rng);
    auto [mse_phi, mse_psi] =
        analysis::mse_topk_kv(truth, out, std::min<int64_t>(ex.topk, ex.kv->d));
    result["lambda"] = out.lambda;
    result["phi"] = out.phi;
    result["psi"] = out.psi;
    result["mse_phi_topk"] = mse_phi;
    result["mse_psi_topk"] = mse_psi;
    result["transcript"] = json::parse(out.transcript.to_json());
  } else {
    CategoricalDataset data = *ex.cat;
    if (ex.user_sampling < 1.0) {
      Rng s = root.substream("user_sample");
      data = user_sample(data, ex.user_sampling, s);
    }
    auto truth = true_frequencies(*ex.cat);
    Rng run_rng = root.substream("run");
    protocols::ProtocolOutput out;
    if (ex.protocol == "lnf") {
      auto dist = dummy::calibrate_offset(ex.budget.eps / 2.0, ex.budget.delta / 2.0,
                                          ex.beta == 1.0 ? 1.0 : ex.beta);
      protocols::LnfOptions opt;
      opt.log_mode = transport::LogMode::kCounters;
      out = protocols::lnf_run(data, dist, ex.beta, ex.suite, run_rng, opt);
    } else if (ex.protocol == "ch" || ex.protocol == "gh") {
      auto dist = dummy::calibrate_offset(ex.budget.eps / 2.0, ex.budget.delta / 2.0,
                                          ex.beta == 1.0 ? 1.0 : ex.beta);
      int64_t b = ex.b > 0 ? ex.b : std::min<int64_t>(data.d, 1024);
      if (ex.protocol == "ch") {
        Rng hash_rng = root.substream("hash");
        hashing::AffineHash hash(hashing::sample_hash(data.d, b, hash_rng));
        protocols::ChOptions opt;
        opt.log_mode = transport::LogMode::kCounters;
        out = protocols::ch_run(data, dist, ex.beta, hash, ex.suite, run_rng, opt);
      } else {
        int64_t g = ex.config.value("groups", int64_t{1});
        out = protocols::gh_run(data, dist, ex.beta, g, b, ex.suite, run_rng, {},
                                transport::LogMode::kCounters);
      }
    } else if (ex.protocol == "fme" || ex.protocol == "proposal_star") {
      auto cfg = assemble_fme(ex);
      Rng hash_rng = root.substream("hash");
      hashing::AffineHash hash(hashing::sample_hash(data.d, cfg.b, hash_rng));
      if (ex.protocol == "fme") {
        out = protocols::fme_run(data, cfg, hash, run_rng);
      } else {
        double extra = ex.config.value("extra_eps", ex.budget.eps);
        out = protocols::proposal_star_run(data, cfg, extra, hash, run_rng);
      }
    } else if (ex.protocol == "grr") {
      double eps0 = analysis::invert_amplify(ex.budget.eps,
                                             static_cast<double>(data.n), ex.budget.delta);
      out = protocols::pure_grr_run(data, eps0, ex.suite, run_rng,
                                    transport::LogMode::kCounters);
    } else {
      throw ConfigError("unknown protocol '" + ex.protocol + "'");
    }
    result["mse_topk"] =
        analysis::mse_topk(truth.entries, out, std::min<int64_t>(ex.topk, ex.cat->d));
    if (out.sparse) {
      result["lambda"] = out.lambda;
      result["estimates"] = out.lambda_estimates;
    } else {
      auto top = analysis::topk_items(truth.entries, std::min<int64_t>(ex.topk, data.d));
      json est = json::object();
      for (int64_t i : top) est[std::to_string(i)] = out.estimate_for(i);
      result["top_estimates"] = est;
    }
    result["transcript"] = json::parse(out.transcript.to_json());
  }
  result["config_hash"] = config_hash(ex.config);
  if (!out_dir.empty()) {
    write_manifest(out_dir, ex.config);
    write_file(out_dir + "/result.json", result.dump(2) + "\n");
  }
  std::cout << result.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

double one_mse(const Experiment& ex, double eps, uint64_t trial, Rng& root) {
  Rng trial_rng = root.substream("trial", trial);
  if (ex.protocol == "kv") {
    auto truth = true_kv_statistics(*ex.kv);
    auto cfg = assemble_fme(ex, eps);
    Rng hash_rng = trial_rng.substream("hash");
    hashing::AffineHash hash(hashing::sample_hash(ex.kv->d + ex.kappa, cfg.b, hash_rng));
    Rng run_rng = trial_rng.substream("run");
    auto out = protocols::kv_run(*ex.kv, cfg, ex.kappa, hash, run_rng);
    auto [mse_phi, mse_psi] =
        analysis::mse_topk_kv(truth, out, std::min<int64_t>(ex.topk, ex.kv->d));
    return mse_phi + mse_psi;
  }
  auto truth = true_frequencies(*ex.cat);
  Rng run_rng = trial_rng.substream("run");
  protocols::ProtocolOutput out;
  if (ex.protocol == "lnf") {
    auto dist = dummy::calibrate_offset(eps / 2.0, ex.budget.delta / 2.0, ex.beta);
    protocols::LnfOptions opt;
    opt.log_mode = transport::LogMode::kCounters;
    out = protocols::lnf_run(*ex.cat, dist, ex.beta, ex.suite, run_rng, opt);
  } else if (ex.protocol == "fme") {
    auto cfg = assemble_fme(ex, eps);
    Rng hash_rng = trial_rng.substream("hash");
    hashing::AffineHash hash(hashing::sample_hash(ex.cat->d, cfg.b, hash_rng));
    out = protocols::fme_run(*ex.cat, cfg, hash, run_rng);
  } else if (ex.protocol == "grr") {
    double eps0 = analysis::invert_amplify(eps, static_cast<double>(ex.cat->n),
                                           ex.budget.delta);
    out = protocols::pure_grr_run(*ex.cat, eps0, ex.suite, run_rng,
                                  transport::LogMode::kCounters);
  } else {
    throw ConfigError("mse sweep supports protocols lnf, fme, kv, grr");
  }
  return analysis::mse_topk(truth.entries, out, std::min<int64_t>(ex.topk, ex.cat->d));
}

int cmd_sweep(const Experiment& ex, const std::string& kind, const std::string& out_dir) {
  Rng root(ex.seed);
  std::string csv;
  if (kind == "mse") {
    std::vector<double> grid = {0.1, 0.5, 1.0, 2.0, 5.0};
    if (ex.config.contains("eps_grid"))
      grid = ex.config.at("eps_grid").get<std::vector<double>>();
    csv = csv_header(ex.config, "eps,mean_mse,stderr");
    for (double eps : grid) {
      double sum = 0, sum_sq = 0;
      for (int64_t t = 0; t < ex.trials; ++t) {
        double m = one_mse(ex, eps, static_cast<uint64_t>(t), root);
        sum += m;
        sum_sq += m * m;
      }
      double mean = sum / static_cast<double>(ex.trials);
      double var = sum_sq / static_cast<double>(ex.trials) - mean * mean;
      double se = std::sqrt(std::max(0.0, var) / static_cast<double>(ex.trials));
      csv += fmt(eps) + "," + fmt(mean) + "," + fmt(se) + "\n";
    }
  } else if (kind == "collusion") {
    csv = csv_header(ex.config, "omega_frac,actual_eps");
    analysis::ProtocolKind kind_enum = ex.protocol == "grr"
                                           ? analysis::ProtocolKind::kPureGrr
                                           : analysis::ProtocolKind::kFme;
    for (double frac = 0.0; frac < 0.95; frac += 0.1) {
      attacks::CollusionScenario s{ex.users(),
                                   static_cast<int64_t>(frac * static_cast<double>(ex.users())),
                                   ex.budget.eps, ex.budget.delta};
      csv += fmt(frac) + "," + fmt(attacks::actual_epsilon(kind_enum, s)) + "\n";
    }
  } else if (kind == "efficiency") {
    // Measured C_tot while the domain is small enough to simulate; the
    // analytic bound beyond that.
    std::vector<double> grid = {1e5, 1e6, 1e7, 1e8, 1e9};
    if (ex.config.contains("d_grid"))
      grid = ex.config.at("d_grid").get<std::vector<double>>();
    double measure_cap = ex.config.value("measure_cap", 2e6);
    csv = csv_header(ex.config, "d,c_tot,source");
    for (double dval : grid) {
      int64_t d = static_cast<int64_t>(dval);
      Experiment point = ex;
      json dataset = ex.config.value("dataset", json::object());
      dataset["d"] = d;
      dataset["kind"] = "zipf";
      dataset["exponent"] = dataset.value("exponent", 0.0);
      point.cat = make_categorical(dataset);
      auto cfg = assemble_fme(point);
      if (dval <= measure_cap) {
        double sum = 0;
        for (int64_t t = 0; t < ex.trials; ++t) {
          Rng trial_rng = root.substream("eff", static_cast<uint64_t>(t));
          Rng hash_rng = trial_rng.substream("hash");
          hashing::AffineHash hash(hashing::sample_hash(d, cfg.b, hash_rng));
          Rng run_rng = trial_rng.substream("run");
          auto out = protocols::fme_run(*point.cat, cfg, hash, run_rng);
          sum += out.transcript.measure().c_tot;
        }
        csv += fmt(dval) + "," + fmt(sum / static_cast<double>(ex.trials)) + ",measured\n";
      } else {
        analysis::PredictorInput in;
        in.n = static_cast<double>(point.users());
        in.d = dval;
        in.beta = ex.beta;
        in.alpha = ex.alpha;
        in.l = static_cast<double>(cfg.l);
        in.b = static_cast<double>(cfg.b);
        in.mu1 = cfg.d1.mean();
        in.mu2 = cfg.d2.mean();
        in.tau1 = ex.suite.size_model().tau1;
        in.tau2 = ex.suite.size_model().tau2;
        in.tau3 = ex.suite.size_model().tau3;
        csv += fmt(dval) + "," + fmt(analysis::fme_comm_bound(in).c_tot) + ",analytic\n";
      }
    }
  } else {
    throw ConfigError("sweep kind must be mse, collusion, or efficiency");
  }
  if (!out_dir.empty()) {
    write_manifest(out_dir, ex.config);
    write_file(out_dir + "/sweep_" + kind + ".csv", csv);
  }
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

int cmd_attack(const Experiment& ex, const std::string& out_dir) {
  Rng root(ex.seed);
  double lambda = ex.config.value("lambda", 0.1);
  int64_t t_count = ex.config.value("targets", int64_t{10});
  int64_t trials = ex.config.value("attack_trials", int64_t{200});
  std::string csv = csv_header(
      ex.config, "protocol,eps,lambda,targets,analytic_gain,empirical_gain,stderr");

  auto emit = [&](const std::string& name, const attacks::GainEstimate& g) {
    csv += name + "," + fmt(ex.budget.eps) + "," + fmt(lambda) + "," +
           std::to_string(t_count) + "," + fmt(g.analytic) + "," + fmt(g.empirical) +
           "," + fmt(g.std_error) + "\n";
  };

  if (ex.protocol == "kv") {
    auto truth = true_kv_statistics(*ex.kv);
    auto cfg = assemble_fme(ex);
    Rng hash_rng = root.substream("hash");
    hashing::AffineHash hash(hashing::sample_hash(ex.kv->d + ex.kappa, cfg.b, hash_rng));
    attacks::PoisoningScenario scen;
    scen.targets = analysis::topk_items(truth.phi, t_count);
    scen.n_genuine = ex.kv->n;
    scen.n_fake = static_cast<int64_t>(
        std::llround(lambda / (1.0 - lambda) * static_cast<double>(ex.kv->n)));
    Rng attack_rng = root.substream("attack");
    auto g = attacks::m2ga_kv(*ex.kv, scen, cfg, ex.kappa, hash, trials, attack_rng);
    emit("kv_phi", g.phi);
    emit("kv_psi", g.psi);
  } else {
    auto truth = true_frequencies(*ex.cat);
    attacks::PoisoningScenario scen;
    scen.targets = analysis::topk_items(truth.entries, t_count);
    scen.n_genuine = ex.cat->n;
    scen.n_fake = static_cast<int64_t>(
        std::llround(lambda / (1.0 - lambda) * static_cast<double>(ex.cat->n)));
    Rng attack_rng = root.substream("attack");
    if (ex.protocol == "lnf") {
      auto dist = dummy::calibrate_offset(ex.budget.eps / 2.0, ex.budget.delta / 2.0,
                                          ex.beta);
      emit("lnf", attacks::mga_lnf(*ex.cat, scen, dist, ex.beta, ex.suite, trials,
                                   attack_rng));
    } else if (ex.protocol == "fme") {
      auto cfg = assemble_fme(ex);
      Rng hash_rng = root.substream("hash");
      hashing::AffineHash hash(hashing::sample_hash(ex.cat->d, cfg.b, hash_rng));
      emit("fme", attacks::mga_fme(*ex.cat, scen, cfg, hash, trials, attack_rng));
    } else if (ex.protocol == "ch") {
      auto dist = dummy::calibrate_offset(ex.budget.eps / 2.0, ex.budget.delta / 2.0,
                                          ex.beta);
      int64_t b = ex.b > 0 ? ex.b : std::min<int64_t>(ex.cat->d, 1024);
      Rng hash_rng = root.substream("hash");
      hashing::AffineHash hash(hashing::sample_hash(ex.cat->d, b, hash_rng));
      // Without an engineered collision the attacker covers one target.
      scen.targets = {analysis::topk_items(truth.entries, 1).front()};
      emit("ch", attacks::mga_ch(*ex.cat, scen, dist, ex.beta, hash, ex.suite, false,
                                 trials, attack_rng));
    } else {
      throw ConfigError("attack supports protocols lnf, fme, ch, kv");
    }
  }
  if (!out_dir.empty()) {
    write_manifest(out_dir, ex.config);
    write_file(out_dir + "/attack.csv", csv);
  }
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate / certify / predict / replay
// ---------------------------------------------------------------------------

int cmd_calibrate(double eps, double delta, double beta) {
  auto d = dummy::calibrate_offset(eps, delta, beta);
  json out;
  out["distribution"] = d.describe();
  out["mean"] = d.mean();
  out["variance"] = d.variance();
  out["certified_delta"] = dummy::certify_dp(d, beta, eps);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_certify(const json& dist_spec, double beta, double eps) {
  auto d = dist_from_json(dist_spec);
  json out;
  out["distribution"] = d.describe();
  out["beta"] = beta;
  out["eps"] = eps;
  out["delta"] = dummy::certify_dp(d, beta, eps);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_predict(const Experiment& ex, const std::string& out_dir) {
  auto cfg = assemble_fme(ex);
  analysis::PredictorInput in;
  in.n = static_cast<double>(ex.users());
  in.d = static_cast<double>(ex.domain());
  in.b = static_cast<double>(cfg.b);
  in.l = static_cast<double>(cfg.l);
  in.beta = ex.beta;
  in.alpha = ex.alpha;
  in.kappa = static_cast<double>(ex.kappa);
  in.mu1 = cfg.d1.mean();
  in.sigma1_sq = cfg.d1.variance();
  in.mu2 = cfg.d2.mean();
  in.sigma2_sq = cfg.d2.variance();
  in.tau1 = ex.suite.size_model().tau1;
  in.tau2 = ex.suite.size_model().tau2;
  in.tau3 = ex.suite.size_model().tau3;
  auto bound = analysis::fme_comm_bound(in);

  // Measure a handful of runs to report next to the predictions.
  Rng root(ex.seed);
  double c_us = 0, c_sd = 0, mean_lambda = 0;
  int64_t runs = std::max<int64_t>(ex.trials, 1);
  for (int64_t t = 0; t < runs; ++t) {
    Rng trial = root.substream("predict", static_cast<uint64_t>(t));
    Rng hash_rng = trial.substream("hash");
    Rng run_rng = trial.substream("run");
    if (ex.protocol == "kv") {
      hashing::AffineHash hash(hashing::sample_hash(ex.kv->d + ex.kappa, cfg.b, hash_rng));
      auto out = protocols::kv_run(*ex.kv, cfg, ex.kappa, hash, run_rng);
      auto m = out.transcript.measure();
      c_us += m.c_us;
      c_sd += m.c_sd;
      mean_lambda += static_cast<double>(out.lambda.size());
    } else {
      hashing::AffineHash hash(hashing::sample_hash(ex.cat->d, cfg.b, hash_rng));
      auto out = protocols::fme_run(*ex.cat, cfg, hash, run_rng);
      auto m = out.transcript.measure();
      c_us += m.c_us;
      c_sd += m.c_sd;
      mean_lambda += static_cast<double>(out.lambda.size());
    }
  }
  c_us /= static_cast<double>(runs);
  c_sd /= static_cast<double>(runs);
  mean_lambda /= static_cast<double>(runs);

  auto row = [&](const std::string& name, double predicted, double measured) {
    double rel = predicted != 0.0 ? (measured - predicted) / predicted : 0.0;
    return name + "," + fmt(predicted) + "," + fmt(measured) + "," + fmt(rel) + "\n";
  };
  std::string csv = csv_header(ex.config, "quantity,predicted,measured,rel_error");
  csv += row("c_us_bits", bound.c_us, c_us);
  csv += row("c_sd_bound_bits", bound.c_sd, c_sd);
  csv += row("e_lambda_bound", bound.e_lambda, mean_lambda);
  csv += row("optimal_b", static_cast<double>(cfg.b), static_cast<double>(cfg.b));
  if (!out_dir.empty()) {
    write_manifest(out_dir, ex.config);
    write_file(out_dir + "/predict.csv", csv);
  }
  std::cout << csv;
  return 0;
}

json builtin_toy_replay() {
  return json{{"dataset", {{"values", {2, 8, 4, 8, 2}}, {"d", 8}}},
              {"hash_table", {2, 1, 2, 3, 2, 4, 2, 1}},
              {"b", 4},
              {"d1", {{"kind", "binomial"}, {"m", 2}, {"p", 0.5}}},
              {"d2", {{"kind", "binomial"}, {"m", 2}, {"p", 0.5}}},
              {"beta", 1.0},
              {"alpha", 0.05},
              {"l", 4},
              {"keep", {true, true, true, true, true}},
              {"dummies1", {1, 0, 1, 1}},
              {"dummies2", {{"2", 1}, {"8", 2}}}};
}

int cmd_replay(const std::string& file, const std::string& builtin) {
  json spec;
  if (!builtin.empty()) {
    if (builtin != "toy") throw ConfigError("unknown builtin replay '" + builtin + "'");
    spec = builtin_toy_replay();
  } else {
    spec = load_config(file);
  }
  CategoricalDataset data;
  data.values = spec.at("dataset").at("values").get<std::vector<int64_t>>();
  data.n = static_cast<int64_t>(data.values.size());
  data.d = spec.at("dataset").at("d").get<int64_t>();

  hashing::TableHash hash(spec.at("hash_table").get<std::vector<int64_t>>(),
                          spec.at("b").get<int64_t>());
  protocols::FmeConfig cfg;
  cfg.d1 = dist_from_json(spec.at("d1"));
  cfg.d2 = dist_from_json(spec.at("d2"));
  cfg.beta = spec.value("beta", 1.0);
  cfg.alpha = spec.value("alpha", 0.05);
  cfg.b = spec.at("b").get<int64_t>();
  cfg.l = spec.value("l", cfg.b);

  protocols::ReplayScript script;
  if (spec.contains("keep")) script.keep = spec.at("keep").get<std::vector<bool>>();
  if (spec.contains("dummies1"))
    script.dummies1 = spec.at("dummies1").get<std::vector<int64_t>>();
  if (spec.contains("dummies2")) {
    std::map<int64_t, int64_t> d2;
    for (auto& [key, value] : spec.at("dummies2").items())
      d2[std::stoll(key)] = value.get<int64_t>();
    script.dummies2 = d2;
  }
  if (spec.contains("pi")) script.pi = spec.at("pi").get<std::vector<uint32_t>>();
  if (spec.contains("rho")) script.rho = spec.at("rho").get<std::vector<uint32_t>>();

  protocols::FmeOptions opt;
  opt.replay = &script;
  Rng rng(spec.value("seed", uint64_t{1}));
  auto out = protocols::fme_run(data, cfg, hash, rng, opt);

  std::string lambda_str;
  for (int64_t v : out.lambda) lambda_str += (lambda_str.empty() ? "" : ",") + std::to_string(v);
  std::string est;
  for (int64_t i = 1; i <= data.d; ++i)
    est += (est.empty() ? "" : ",") + fmt(out.estimate_for(i));
  std::cout << "lambda=" << lambda_str << "\n";
  std::cout << "estimates=" << est << "\n";
  std::cout << "one_round=" << (out.transcript.one_round() ? "true" : "false") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"augmented shuffle DP protocol simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, cipher_flag, tau_flag;
  uint64_t seed_flag = 0;
  double eps_flag = 0.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--out", out_dir, "output directory for CSV/manifest");
    cmd->add_option("--seed", seed_flag, "override config seed");
    cmd->add_option("--eps", eps_flag, "override budget eps");
    cmd->add_option("--cipher", cipher_flag, "mock|real");
    cmd->add_option("--tau", tau_flag, "mock size model, e.g. 712,1392,2072");
  };

  auto* run = app.add_subcommand("run", "one protocol invocation");
  std::string protocol_flag;
  run->add_option("--protocol", protocol_flag, "lnf|ch|gh|fme|proposal_star|kv|grr");
  add_common(run);

  auto* sweep = app.add_subcommand("sweep", "parameter sweeps to CSV");
  std::string sweep_kind = "mse";
  sweep->add_option("--kind", sweep_kind, "mse|collusion|efficiency");
  std::string sweep_protocol;
  sweep->add_option("--protocol", sweep_protocol, "protocol id");
  add_common(sweep);

  auto* attack = app.add_subcommand("attack", "poisoning attack harness");
  std::string attack_protocol;
  attack->add_option("--protocol", attack_protocol, "lnf|fme|ch|kv");
  double lambda_flag = -1.0;
  attack->add_option("--lambda", lambda_flag, "fraction of fake users");
  int64_t targets_flag = 0;
  attack->add_option("--targets", targets_flag, "number of target items");
  add_common(attack);

  auto* calibrate = app.add_subcommand("calibrate", "fit a dummy-count distribution");
  double cal_eps = 1.0, cal_delta = 1e-12, cal_beta = 1.0;
  calibrate->add_option("--eps", cal_eps, "per-mechanism eps")->required();
  calibrate->add_option("--delta", cal_delta, "per-mechanism delta");
  calibrate->add_option("--beta", cal_beta, "sampling probability");

  auto* certify = app.add_subcommand("certify", "delta(eps) of a distribution");
  double cert_eps = 1.0, cert_beta = 1.0;
  double cert_decay_eps = 0.0;
  std::string cert_beta_str;
  std::string cert_dist;
  certify->add_option("--eps", cert_eps, "eps to certify at")->required();
  certify->add_option("--dist", cert_dist, "JSON distribution spec");
  certify->add_option("--decay-eps", cert_decay_eps,
                      "shorthand: one-sided geometric with decay e^-eps");
  certify->add_option("--beta", cert_beta_str, "sampling probability or 'auto'");

  auto* predict = app.add_subcommand("predict", "closed-form predictor report");
  add_common(predict);

  auto* replay = app.add_subcommand("replay", "scripted protocol replay");
  std::string replay_file, replay_builtin;
  replay->add_option("--file", replay_file, "replay script (JSON)");
  replay->add_option("--builtin", replay_builtin, "builtin fixture name (toy)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) return cmd_calibrate(cal_eps, cal_delta, cal_beta);
    if (certify->parsed()) {
      json dist_spec;
      if (cert_decay_eps > 0.0) {
        dist_spec = {{"kind", "ageom"},
                     {"decay", std::exp(-cert_decay_eps)},
                     {"offset", 0},
                     {"two_sided", false}};
        cert_beta = cert_beta_str.empty() || cert_beta_str == "auto"
                        ? 1.0 - std::exp(-cert_decay_eps)
                        : std::stod(cert_beta_str);
      } else {
        dist_spec = json::parse(cert_dist);
        cert_beta = cert_beta_str.empty() ? 1.0 : std::stod(cert_beta_str);
      }
      return cmd_certify(dist_spec, cert_beta, cert_eps);
    }
    if (replay->parsed()) return cmd_replay(replay_file, replay_builtin);

    json cfg = load_config(config_path);
    if (seed_flag != 0) cfg["seed"] = seed_flag;
    if (eps_flag > 0.0) cfg["budget"]["eps"] = eps_flag;
    if (!cipher_flag.empty()) cfg["cipher"] = cipher_flag;
    if (!tau_flag.empty()) {
      json tau = json::array();
      std::istringstream ss(tau_flag);
      std::string part;
      while (std::getline(ss, part, ',')) tau.push_back(std::stod(part));
      cfg["tau"] = tau;
    }
    if (run->parsed() && !protocol_flag.empty()) cfg["protocol"] = protocol_flag;
    if (sweep->parsed() && !sweep_protocol.empty()) cfg["protocol"] = sweep_protocol;
    if (attack->parsed()) {
      if (!attack_protocol.empty()) cfg["protocol"] = attack_protocol;
      if (lambda_flag >= 0.0) cfg["lambda"] = lambda_flag;
      if (targets_flag > 0) cfg["targets"] = targets_flag;
      if (cfg.value("protocol", "fme") == std::string("kv") && !cfg.contains("dataset"))
        cfg["dataset"] = {{"kind", "kv_synth"}};
    }
    Experiment ex = build_experiment(cfg);
    if (run->parsed()) return cmd_run(ex, out_dir);
    if (sweep->parsed()) return cmd_sweep(ex, sweep_kind, out_dir);
    if (attack->parsed()) return cmd_attack(ex, out_dir);
    if (predict->parsed()) return cmd_predict(ex, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dummy::CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDataset;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
