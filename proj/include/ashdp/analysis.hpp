#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ashdp/dataset.hpp"
#include "ashdp/protocols.hpp"

namespace ashdp::analysis {

// Privacy amplification by shuffling: epsilon after shuffling n reports from
// an eps0-LDP randomizer, at the given delta. Above the cap
// eps0 > ln(n / (8 ln(2/delta)) - 1) no amplification applies.
double amplification_cap(double n, double delta);
double amplify(double eps0, double n, double delta);
// Smallest eps0 whose amplified epsilon reaches `target` (bisection).
double invert_amplify(double target, double n, double delta);

// Expected squared error of the LNF estimate for an item of frequency f_i.
double lnf_error(double f_i, double n, double beta, double sigma_sq);

// Expected squared error of the CH estimate, including the hash-collision
// term over the full frequency vector.
double ch_error(const std::vector<double>& f, int64_t item, double n, double beta,
                int64_t b, double sigma_sq);

// FME: variance conditional on selection, unconditional squared error, and
// the Chernoff tail bound on the non-selection probability at
// c_th = (1 - zeta) * n * f_i * beta.
double fme_variance(double f_i, double n, double beta, double sigma2_sq);
double fme_error(double f_i, double n, double beta, double sigma2_sq, double eta_i);
double eta_chernoff_bound(double f_i, double n, double beta, double zeta);

struct PredictorInput {
  double n = 0;
  double d = 0;
  double b = 0;
  double l = 0;
  double beta = 1.0;
  double alpha = 0.05;
  double kappa = 1.0;
  double mu1 = 0, sigma1_sq = 0;
  double mu2 = 0, sigma2_sq = 0;
  double tau1 = 712, tau2 = 1392, tau3 = 2072;
};

struct CommBound {
  double c_us = 0;
  double c_sd = 0;
  double c_tot = 0;
  double e_lambda = 0;
};

// Communication bound for FME: C_US exactly, C_SD and E[|Lambda|] as upper
// bounds. The E[|Lambda|] branch follows beta*n <= l <= b vs otherwise.
CommBound fme_comm_bound(const PredictorInput& in);

// LNF analytic total cost tau * ((1 + beta) n + mu d).
double lnf_comm(double n, double d, double beta, double mu, double tau);

enum class BRegime { kFullL, kSmallL };  // l = b vs l < beta n
double optimal_b(const PredictorInput& in, BRegime regime);
int64_t l_policy(int64_t n, int64_t d, int64_t c = 50);

enum class ProtocolKind { kLnf, kCh, kGh, kFme, kKv, kPureGrr };

// Maximum poisoning gain for frequency estimation. sum_eta_f is the
// Sum eta_i f_i excess term (FME only; 0 elsewhere).
double gain_categorical(ProtocolKind kind, double lambda, double f_target_sum,
                        int64_t target_count, double sum_eta_f = 0.0);

struct KvGains {
  double g_phi = 0;
  double g_psi = 0;
};

struct KvTarget {
  double phi = 0;
  double psi = 0;
  double eta = 0;
};

// Simplified closed forms, valid when every user holds at most kappa pairs.
KvGains kv_gains_simplified(double lambda, double kappa,
                            const std::vector<KvTarget>& targets);

// General forms computed straight from the dataset (xi_j = max{|x_j|, kappa}).
KvGains kv_gains_general(const KVDataset& data, const std::vector<int64_t>& targets,
                         int64_t n_fake, int64_t kappa, const std::vector<double>& eta);

struct KvAccuracy {
  double e_phi = 0;       // E[Phi_hat | selected]
  double v_phi = 0;       // V[Phi_hat | selected]
  double e_psi = 0;       // E[Psi_hat | selected] (Taylor)
  double v_psi_bound = 0; // V[Psi_hat | selected] upper bound (Taylor)
  double loss_phi = 0;    // unconditional expected squared error
  double loss_psi = 0;
};

KvAccuracy kv_accuracy(double phi, double psi, double n, double beta, double kappa,
                       double sigma2_sq, double eta);

// Equal-error point of the hypothesis-testing bound: p* = (1 - delta)/(1 + e^eps).
double hypothesis_error_bound(double eps, double delta);

// Indices (1-based) of the k largest true frequencies; ties favor the
// smaller index.
std::vector<int64_t> topk_items(const std::vector<double>& truth, int64_t k);

double mse_topk(const std::vector<double>& truth, const std::vector<double>& estimate,
                int64_t k);
double mse_topk(const std::vector<double>& truth, const protocols::ProtocolOutput& out,
                int64_t k);
// KV MSEs over the top-k keys by true Phi; unreported keys read as (0, 1).
std::pair<double, double> mse_topk_kv(const KvStatistics& truth,
                                      const protocols::KvOutput& out, int64_t k,
                                      bool clip_phi = false);

}  // namespace ashdp::analysis
