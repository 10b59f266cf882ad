// Python bindings for the main operations: datasets, calibration, the
// protocol runs, and the closed-form predictors.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "ashdp/analysis.hpp"
#include "ashdp/attacks.hpp"
#include "ashdp/dataset.hpp"
#include "ashdp/dummy.hpp"
#include "ashdp/hashing.hpp"
#include "ashdp/protocols.hpp"

namespace py = pybind11;
using namespace ashdp;

namespace {

dummy::DummyCountDistribution make_dist(const std::string& kind, py::kwargs kwargs) {
  if (kind == "binomial")
    return dummy::DummyCountDistribution::binomial(kwargs["m"].cast<int64_t>(),
                                                   kwargs["p"].cast<double>());
  if (kind == "point")
    return dummy::DummyCountDistribution::point_mass(kwargs["k"].cast<int64_t>());
  if (kind == "ageom")
    return dummy::DummyCountDistribution::asymmetric_geometric(
        kwargs["decay"].cast<double>(), kwargs["offset"].cast<int64_t>(),
        kwargs.contains("two_sided") ? kwargs["two_sided"].cast<bool>() : true);
  throw std::invalid_argument("unknown distribution kind: " + kind);
}

protocols::FmeConfig make_config(const dummy::DummyCountDistribution& d1,
                                 const dummy::DummyCountDistribution& d2, double beta,
                                 double alpha, int64_t l, int64_t b) {
  protocols::FmeConfig cfg;
  cfg.d1 = d1;
  cfg.d2 = d2;
  cfg.beta = beta;
  cfg.alpha = alpha;
  cfg.l = l;
  cfg.b = b;
  cfg.log_mode = transport::LogMode::kCounters;
  return cfg;
}

py::dict measure_dict(const transport::Transcript& t) {
  auto m = t.measure();
  py::dict out;
  out["c_us"] = m.c_us;
  out["c_sd"] = m.c_sd;
  out["c_tot"] = m.c_tot;
  out["one_round"] = t.one_round();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "augmented shuffle DP protocol simulator";

  py::class_<CategoricalDataset>(m, "CategoricalDataset")
      .def(py::init([](int64_t d, std::vector<int64_t> values) {
             CategoricalDataset out;
             out.d = d;
             out.n = static_cast<int64_t>(values.size());
             out.values = std::move(values);
             out.validate();
             return out;
           }),
           py::arg("d"), py::arg("values"))
      .def_readonly("n", &CategoricalDataset::n)
      .def_readonly("d", &CategoricalDataset::d)
      .def_readonly("values", &CategoricalDataset::values);

  py::class_<KVDataset>(m, "KVDataset")
      .def(py::init([](int64_t d, std::vector<std::vector<std::pair<int64_t, double>>> records) {
             KVDataset out;
             out.d = d;
             out.n = static_cast<int64_t>(records.size());
             for (auto& rec : records) {
               std::vector<KvPair> pairs;
               for (auto& [k, v] : rec) pairs.push_back({k, v});
               out.records.push_back(std::move(pairs));
             }
             out.validate();
             return out;
           }),
           py::arg("d"), py::arg("records"))
      .def_readonly("n", &KVDataset::n)
      .def_readonly("d", &KVDataset::d);

  m.def("synth_zipf", &synth_zipf, py::arg("n"), py::arg("d"), py::arg("exponent"),
        py::arg("seed"));
  m.def(
      "synth_kv",
      [](int64_t n, int64_t d, int64_t pairs_per_user, const std::string& values,
         uint64_t seed) {
        ValueLaw law = values == "signs"      ? ValueLaw::signs()
                       : values == "keyconst" ? ValueLaw::key_const()
                                              : ValueLaw::uniform();
        return synth_kv(n, d, PairsPerUserLaw::fixed(pairs_per_user), law, seed);
      },
      py::arg("n"), py::arg("d"), py::arg("pairs_per_user") = 1,
      py::arg("values") = "uniform", py::arg("seed") = 1);
  m.def("load_categorical_csv", &load_categorical_csv, py::arg("path"), py::arg("d") = 0);
  m.def("load_kv_csv", &load_kv_csv, py::arg("path"), py::arg("d") = 0);

  m.def("true_frequencies",
        [](const CategoricalDataset& data) { return true_frequencies(data).entries; });
  m.def("true_kv_statistics", [](const KVDataset& data) {
    auto stats = true_kv_statistics(data);
    return py::make_tuple(stats.phi, stats.psi);
  });

  m.def("make_distribution", &make_dist, py::arg("kind"),
        "binomial(m, p), point(k), or ageom(decay, offset, two_sided)");
  py::class_<dummy::DummyCountDistribution>(m, "DummyCountDistribution")
      .def_property_readonly("mean", &dummy::DummyCountDistribution::mean)
      .def_property_readonly("variance", &dummy::DummyCountDistribution::variance)
      .def("pmf", &dummy::DummyCountDistribution::pmf_at)
      .def("tail", &dummy::DummyCountDistribution::tail)
      .def("__repr__", &dummy::DummyCountDistribution::describe);

  m.def("certify_dp", &dummy::certify_dp, py::arg("dist"), py::arg("beta"),
        py::arg("eps"));
  m.def("calibrate_offset", &dummy::calibrate_offset, py::arg("eps"), py::arg("delta"),
        py::arg("beta"));

  m.def("amplify", &analysis::amplify, py::arg("eps0"), py::arg("n"), py::arg("delta"));
  m.def("hypothesis_error_bound", &analysis::hypothesis_error_bound, py::arg("eps"),
        py::arg("delta"));
  m.def("lnf_error", &analysis::lnf_error);
  m.def("fme_variance", &analysis::fme_variance);
  m.def("optimal_b",
        [](double n, double d, double l, double beta, double alpha, double mu1,
           double mu2, bool full_l) {
          analysis::PredictorInput in;
          in.n = n;
          in.d = d;
          in.l = l;
          in.beta = beta;
          in.alpha = alpha;
          in.mu1 = mu1;
          in.mu2 = mu2;
          return analysis::optimal_b(
              in, full_l ? analysis::BRegime::kFullL : analysis::BRegime::kSmallL);
        },
        py::arg("n"), py::arg("d"), py::arg("l"), py::arg("beta") = 1.0,
        py::arg("alpha") = 0.05, py::arg("mu1") = 108.0, py::arg("mu2") = 108.0,
        py::arg("full_l") = false);
  m.def("l_policy", &analysis::l_policy, py::arg("n"), py::arg("d"), py::arg("c") = 50);
  m.def("mse_topk",
        [](const std::vector<double>& truth, const std::vector<double>& est, int64_t k) {
          return analysis::mse_topk(truth, est, k);
        });

  m.def(
      "lnf_run",
      [](const CategoricalDataset& data, const dummy::DummyCountDistribution& dist,
         double beta, uint64_t seed) {
        Rng rng(seed);
        protocols::LnfOptions opt;
        opt.log_mode = transport::LogMode::kCounters;
        auto out = protocols::lnf_run(data, dist, beta, crypto::CipherSuite::mock(), rng,
                                      opt);
        py::dict res;
        res["estimates"] = out.dense;
        res["transcript"] = measure_dict(out.transcript);
        return res;
      },
      py::arg("data"), py::arg("dist"), py::arg("beta") = 1.0, py::arg("seed") = 1);

  m.def(
      "fme_run",
      [](const CategoricalDataset& data, const dummy::DummyCountDistribution& d1,
         const dummy::DummyCountDistribution& d2, double beta, double alpha, int64_t l,
         int64_t b, uint64_t seed) {
        auto cfg = make_config(d1, d2, beta, alpha, l, b);
        Rng rng(seed);
        Rng hash_rng = rng.substream("hash");
        hashing::AffineHash hash(hashing::sample_hash(data.d, b, hash_rng));
        Rng run_rng = rng.substream("run");
        auto out = protocols::fme_run(data, cfg, hash, run_rng);
        py::dict res;
        res["lambda"] = out.lambda;
        res["estimates"] = out.lambda_estimates;
        res["z_th"] = out.z_th;
        res["transcript"] = measure_dict(out.transcript);
        return res;
      },
      py::arg("data"), py::arg("d1"), py::arg("d2"), py::arg("beta") = 1.0,
      py::arg("alpha") = 0.05, py::arg("l") = 1, py::arg("b") = 2, py::arg("seed") = 1);

  m.def(
      "kv_run",
      [](const KVDataset& data, const dummy::DummyCountDistribution& d1,
         const dummy::DummyCountDistribution& d2, int64_t kappa, double beta,
         double alpha, int64_t l, int64_t b, uint64_t seed) {
        auto cfg = make_config(d1, d2, beta, alpha, l, b);
        Rng rng(seed);
        Rng hash_rng = rng.substream("hash");
        hashing::AffineHash hash(hashing::sample_hash(data.d + kappa, b, hash_rng));
        Rng run_rng = rng.substream("run");
        auto out = protocols::kv_run(data, cfg, kappa, hash, run_rng);
        py::dict res;
        res["lambda"] = out.lambda;
        res["phi"] = out.phi;
        res["psi"] = out.psi;
        res["transcript"] = measure_dict(out.transcript);
        return res;
      },
      py::arg("data"), py::arg("d1"), py::arg("d2"), py::arg("kappa") = 1,
      py::arg("beta") = 1.0, py::arg("alpha") = 0.05, py::arg("l") = 1, py::arg("b") = 2,
      py::arg("seed") = 1);

  m.def(
      "pure_grr_run",
      [](const CategoricalDataset& data, double eps0, uint64_t seed) {
        Rng rng(seed);
        auto out = protocols::pure_grr_run(data, eps0, crypto::CipherSuite::mock(), rng,
                                           transport::LogMode::kCounters);
        py::dict res;
        res["estimates"] = out.dense;
        res["transcript"] = measure_dict(out.transcript);
        return res;
      },
      py::arg("data"), py::arg("eps0"), py::arg("seed") = 1);

  m.def("actual_epsilon",
        [](const std::string& protocol, int64_t n, int64_t omega, double target_eps,
           double delta) {
          analysis::ProtocolKind kind = protocol == "grr"
                                            ? analysis::ProtocolKind::kPureGrr
                                            : analysis::ProtocolKind::kFme;
          attacks::CollusionScenario s{n, omega, target_eps, delta};
          return attacks::actual_epsilon(kind, s);
        },
        py::arg("protocol"), py::arg("n"), py::arg("omega"), py::arg("target_eps"),
        py::arg("delta") = 1e-12);
}
