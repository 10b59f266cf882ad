#include "ashdp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ashdp::analysis {

double amplification_cap(double n, double delta) {
  if (n < 1 || delta <= 0.0 || delta > 1.0)
    throw std::invalid_argument("amplification_cap: need n >= 1, delta in (0, 1]");
  double arg = n / (8.0 * std::log(2.0 / delta)) - 1.0;
  if (arg <= 1.0) return 0.0;  // no regime in which amplification helps
  return std::log(arg);
}

double amplify(double eps0, double n, double delta) {
  if (eps0 < 0.0) throw std::invalid_argument("amplify: eps0 must be >= 0");
  if (n < 1 || delta <= 0.0 || delta > 1.0)
    throw std::invalid_argument("amplify: need n >= 1, delta in (0, 1]");
  if (eps0 > amplification_cap(n, delta)) return eps0;
  double term = (std::exp(eps0) - 1.0) * 4.0 * std::sqrt(2.0 * std::log(4.0 / delta)) /
                std::sqrt((std::exp(eps0) + 1.0) * n);
  return std::log1p(term + 4.0 / n);
}

double invert_amplify(double target, double n, double delta) {
  if (target <= 0.0) throw std::invalid_argument("invert_amplify: target must be > 0");
  double cap = amplification_cap(n, delta);
  if (cap <= 0.0 || amplify(cap, n, delta) <= target) return target;  // no amplification
  double lo = 0.0, hi = cap;
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (amplify(mid, n, delta) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double lnf_error(double f_i, double n, double beta, double sigma_sq) {
  if (beta <= 0.0) throw std::invalid_argument("lnf_error: beta must be > 0");
  return f_i * (1.0 - beta) / (n * beta) + sigma_sq / (n * n * beta * beta);
}

double ch_error(const std::vector<double>& f, int64_t item, double n, double beta,
                int64_t b, double sigma_sq) {
  if (b < 2) throw std::invalid_argument("ch_error: b must be >= 2");
  if (item < 1 || item > static_cast<int64_t>(f.size()))
    throw std::invalid_argument("ch_error: item outside [1, d]");
  double f_i = f[static_cast<size_t>(item - 1)];
  double bd = static_cast<double>(b);
  double omega = 0.0;
  for (size_t j = 0; j < f.size(); ++j) {
    if (static_cast<int64_t>(j) == item - 1) continue;
    double fj = f[j];
    double sampled_sq = n * n * fj * fj * beta * beta + n * fj * beta * (1.0 - beta);
    omega += sampled_sq * (bd - 1.0) / (bd * bd) + n * fj * beta * (1.0 - beta) / (bd * bd);
  }
  double core = n * f_i * beta * (1.0 - beta) + sigma_sq + omega;
  double scale = bd * bd / (n * n * beta * beta * (bd - 1.0) * (bd - 1.0));
  return scale * core;
}

double fme_variance(double f_i, double n, double beta, double sigma2_sq) {
  if (beta <= 0.0) throw std::invalid_argument("fme_variance: beta must be > 0");
  return f_i * (1.0 - beta) / (n * beta) + sigma2_sq / (n * n * beta * beta);
}

double fme_error(double f_i, double n, double beta, double sigma2_sq, double eta_i) {
  return (1.0 - eta_i) * fme_variance(f_i, n, beta, sigma2_sq) + eta_i * f_i * f_i;
}

double eta_chernoff_bound(double f_i, double n, double beta, double zeta) {
  if (zeta < 0.0 || zeta > 1.0) throw std::invalid_argument("eta bound: zeta in [0, 1]");
  return std::exp(-zeta * zeta * n * f_i * beta / 2.0);
}

CommBound fme_comm_bound(const PredictorInput& in) {
  CommBound out;
  out.c_us = (in.tau1 + in.tau3) * in.n;
  double bn = in.beta * in.n;
  if (bn <= in.l && in.l <= in.b)
    out.e_lambda = (bn + in.alpha * (in.l - bn)) * in.d / in.b;
  else
    out.e_lambda = in.l * in.d / in.b;
  out.c_sd = (2.0 * in.tau1 + in.tau2 + in.tau3) * (bn + in.mu1 * in.b) +
             in.tau1 * (in.mu2 + 1.0) * out.e_lambda;
  out.c_tot = out.c_us + out.c_sd;
  return out;
}

double lnf_comm(double n, double d, double beta, double mu, double tau) {
  return tau * ((1.0 + beta) * n + mu * d);
}

double optimal_b(const PredictorInput& in, BRegime regime) {
  double head = 2.0 * in.tau1 + in.tau2 + in.tau3;
  if (in.mu1 <= 0.0) throw std::invalid_argument("optimal_b: mu1 must be > 0");
  if (regime == BRegime::kFullL)
    return std::sqrt(in.tau1 * (in.mu2 + 1.0) * in.beta * (1.0 - in.alpha) * in.n * in.d /
                     (head * in.mu1));
  return std::sqrt(in.tau1 * (in.mu2 + 1.0) * in.l * in.d / (head * in.mu1));
}

int64_t l_policy(int64_t n, int64_t d, int64_t c) {
  if (n < 1 || d < 1 || c < 1) throw std::invalid_argument("l_policy: bad arguments");
  int64_t ratio = static_cast<int64_t>(
      std::ceil(static_cast<double>(n) * static_cast<double>(n) / static_cast<double>(d)));
  return std::max(ratio, c);
}

double gain_categorical(ProtocolKind kind, double lambda, double f_target_sum,
                        int64_t target_count, double sum_eta_f) {
  switch (kind) {
    case ProtocolKind::kLnf:
      return lambda * (1.0 - f_target_sum);
    case ProtocolKind::kFme:
      return lambda * (1.0 - f_target_sum) + sum_eta_f;
    case ProtocolKind::kCh:
    case ProtocolKind::kGh:
      // Colliding-hash attacker: one message raises every target at once.
      return lambda * (static_cast<double>(target_count) - f_target_sum);
    default:
      throw std::invalid_argument("gain_categorical: unsupported protocol");
  }
}

KvGains kv_gains_simplified(double lambda, double kappa,
                            const std::vector<KvTarget>& targets) {
  if (targets.empty()) throw std::invalid_argument("kv gains: empty target set");
  double t_size = static_cast<double>(targets.size());
  KvGains out;
  double phi_sum = 0.0, psi_sum = 0.0, eta_term = 0.0, psi_gain = 0.0;
  for (const KvTarget& t : targets) {
    phi_sum += t.phi;
    psi_sum += t.psi;
    eta_term += t.eta * t.phi;
    psi_gain += ((1.0 - lambda) * t.phi * t.psi * t_size + lambda * kappa) /
                ((1.0 - lambda) * t.phi * t_size + lambda * kappa);
  }
  out.g_phi = lambda * (kappa - phi_sum) + eta_term;
  out.g_psi = psi_gain - psi_sum;
  return out;
}

KvGains kv_gains_general(const KVDataset& data, const std::vector<int64_t>& targets,
                         int64_t n_fake, int64_t kappa, const std::vector<double>& eta) {
  if (targets.empty()) throw std::invalid_argument("kv gains: empty target set");
  if (eta.size() != targets.size())
    throw std::invalid_argument("kv gains: eta size must match targets");
  KvStatistics truth = true_kv_statistics(data);
  double n = static_cast<double>(data.n);
  double np = static_cast<double>(n_fake);
  double t_size = static_cast<double>(targets.size());

  // Per-target holder sums of 1/xi_j and psi_{j,i}/xi_j.
  double inv_xi_total = 0.0;
  double phi_sum = 0.0, psi_sum = 0.0, eta_term = 0.0, psi_gain = 0.0;
  for (size_t ti = 0; ti < targets.size(); ++ti) {
    int64_t key = targets[ti];
    double inv_xi = 0.0, psi_over_xi = 0.0;
    for (const auto& rec : data.records) {
      double xi = static_cast<double>(
          std::max<int64_t>(static_cast<int64_t>(rec.size()), kappa));
      for (const auto& kv : rec) {
        if (kv.key == key) {
          inv_xi += 1.0 / xi;
          psi_over_xi += kv.value / xi;
        }
      }
    }
    inv_xi_total += inv_xi;
    phi_sum += truth.phi[static_cast<size_t>(key - 1)];
    psi_sum += truth.psi[static_cast<size_t>(key - 1)];
    eta_term += eta[ti] * truth.phi[static_cast<size_t>(key - 1)];
    psi_gain += (psi_over_xi + np / t_size) / (inv_xi + np / t_size);
  }
  KvGains out;
  out.g_phi = static_cast<double>(kappa) / (n + np) * (inv_xi_total + np) - phi_sum + eta_term;
  out.g_psi = psi_gain - psi_sum;
  return out;
}

KvAccuracy kv_accuracy(double phi, double psi, double n, double beta, double kappa,
                       double sigma2_sq, double eta) {
  if (beta <= 0.0 || kappa < 1.0) throw std::invalid_argument("kv_accuracy: bad arguments");
  KvAccuracy out;
  out.e_phi = phi;
  out.v_phi = phi * (kappa - beta) / (n * beta) +
              2.0 * kappa * kappa * sigma2_sq / (n * n * beta * beta);
  out.e_psi = psi;
  double q = beta * (1.0 + psi) / (2.0 * kappa);
  double r = beta * (1.0 - psi) / (2.0 * kappa);
  out.v_psi_bound = kappa * kappa / (n * beta * beta) *
                    (2.0 * (q - q * q + r - r * r) -
                     beta / kappa * (1.0 - beta / kappa));
  out.loss_phi = (1.0 - eta) * out.v_phi + eta * phi * phi;
  out.loss_psi = (1.0 - eta) * out.v_psi_bound + eta * (1.0 - psi) * (1.0 - psi);
  return out;
}

double hypothesis_error_bound(double eps, double delta) {
  if (eps < 0.0 || delta < 0.0 || delta > 1.0)
    throw std::invalid_argument("hypothesis_error_bound: bad arguments");
  return (1.0 - delta) / (1.0 + std::exp(eps));
}

std::vector<int64_t> topk_items(const std::vector<double>& truth, int64_t k) {
  if (k < 0 || k > static_cast<int64_t>(truth.size()))
    throw std::invalid_argument("topk: k outside [0, d]");
  std::vector<int64_t> idx(truth.size());
  std::iota(idx.begin(), idx.end(), int64_t{1});
  std::stable_sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    double fa = truth[static_cast<size_t>(a - 1)];
    double fb = truth[static_cast<size_t>(b - 1)];
    return fa != fb ? fa > fb : a < b;
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

double mse_topk(const std::vector<double>& truth, const std::vector<double>& estimate,
                int64_t k) {
  if (truth.size() != estimate.size())
    throw std::invalid_argument("mse_topk: size mismatch");
  auto top = topk_items(truth, k);
  double acc = 0.0;
  for (int64_t i : top) {
    double diff = estimate[static_cast<size_t>(i - 1)] - truth[static_cast<size_t>(i - 1)];
    acc += diff * diff;
  }
  return acc / static_cast<double>(top.size());
}

double mse_topk(const std::vector<double>& truth, const protocols::ProtocolOutput& out,
                int64_t k) {
  auto top = topk_items(truth, k);
  double acc = 0.0;
  for (int64_t i : top) {
    double diff = out.estimate_for(i) - truth[static_cast<size_t>(i - 1)];
    acc += diff * diff;
  }
  return acc / static_cast<double>(top.size());
}

std::pair<double, double> mse_topk_kv(const KvStatistics& truth,
                                      const protocols::KvOutput& out, int64_t k,
                                      bool clip_phi) {
  auto top = topk_items(truth.phi, k);
  double acc_phi = 0.0, acc_psi = 0.0;
  for (int64_t i : top) {
    double phi_hat = out.phi_for(i);
    if (clip_phi) phi_hat = std::clamp(phi_hat, 0.0, 1.0);
    double dp = phi_hat - truth.phi[static_cast<size_t>(i - 1)];
    double ds = out.psi_for(i) - truth.psi[static_cast<size_t>(i - 1)];
    acc_phi += dp * dp;
    acc_psi += ds * ds;
  }
  double denom = static_cast<double>(top.size());
  return {acc_phi / denom, acc_psi / denom};
}

}  // namespace ashdp::analysis
