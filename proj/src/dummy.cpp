#include "ashdp/dummy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ashdp::dummy {

namespace {
constexpr double kTailMass = 1e-18;
}

PrivacyBudget PrivacyBudget::total(double eps, double delta) {
  PrivacyBudget b;
  b.eps = eps;
  b.delta = delta;
  b.validate();
  return b;
}

PrivacyBudget PrivacyBudget::split(double eps, double delta, double fraction) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("budget split fraction must be in (0, 1)");
  PrivacyBudget b;
  b.eps = eps;
  b.delta = delta;
  b.part1 = {eps * fraction, delta * fraction};
  b.part2 = {eps - b.part1->first, delta - b.part1->second};
  b.validate();
  return b;
}

void PrivacyBudget::validate() const {
  if (eps < 0.0) throw std::invalid_argument("budget: eps must be >= 0");
  if (delta < 0.0 || delta > 1.0) throw std::invalid_argument("budget: delta must be in [0, 1]");
  if (part1.has_value() != part2.has_value())
    throw std::invalid_argument("budget: split must set both parts");
  if (part1) {
    if (std::abs(part1->first + part2->first - eps) > 1e-12 * std::max(1.0, eps))
      throw std::invalid_argument("budget: eps split does not sum to total");
    if (std::abs(part1->second + part2->second - delta) > 1e-15)
      throw std::invalid_argument("budget: delta split does not sum to total");
  }
}

void DummyCountDistribution::finalize() {
  double sum = 0.0, m1 = 0.0, m2 = 0.0;
  for (size_t c = 0; c < pmf_.size(); ++c) {
    sum += pmf_[c];
    m1 += static_cast<double>(c) * pmf_[c];
    m2 += static_cast<double>(c) * static_cast<double>(c) * pmf_[c];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::logic_error("dummy distribution pmf does not sum to 1");
  mean_ = m1;
  variance_ = m2 - m1 * m1;
  cdf_.resize(pmf_.size());
  double acc = 0.0;
  for (size_t c = 0; c < pmf_.size(); ++c) {
    acc += pmf_[c];
    cdf_[c] = acc;
  }
  // Suffix sums, computed right-to-left so tiny tail terms are not absorbed.
  tail_.assign(pmf_.size() + 1, 0.0);
  for (size_t c = pmf_.size(); c-- > 0;) tail_[c] = tail_[c + 1] + pmf_[c];
}

DummyCountDistribution DummyCountDistribution::binomial(int64_t m, double p) {
  if (m < 0 || p < 0.0 || p > 1.0) throw std::invalid_argument("binomial: bad parameters");
  DummyCountDistribution d;
  d.kind_ = Kind::kBinomial;
  d.describe_ = "binomial(" + std::to_string(m) + "," + std::to_string(p) + ")";
  d.pmf_.assign(static_cast<size_t>(m) + 1, 0.0);
  // Iterative binomial coefficients in log space are unnecessary for the
  // moderate m used here.
  double q = 1.0 - p;
  std::vector<double> log_fact(static_cast<size_t>(m) + 1, 0.0);
  for (int64_t i = 1; i <= m; ++i)
    log_fact[static_cast<size_t>(i)] = log_fact[static_cast<size_t>(i - 1)] + std::log(static_cast<double>(i));
  for (int64_t c = 0; c <= m; ++c) {
    if ((p == 0.0 && c > 0) || (p == 1.0 && c < m)) continue;
    double log_pmf = log_fact[static_cast<size_t>(m)] - log_fact[static_cast<size_t>(c)] -
                     log_fact[static_cast<size_t>(m - c)];
    if (p > 0.0) log_pmf += static_cast<double>(c) * std::log(p);
    if (q > 0.0) log_pmf += static_cast<double>(m - c) * std::log(q);
    d.pmf_[static_cast<size_t>(c)] = std::exp(log_pmf);
  }
  // Renormalize rounding residue.
  double s = 0.0;
  for (double v : d.pmf_) s += v;
  for (double& v : d.pmf_) v /= s;
  d.finalize();
  return d;
}

DummyCountDistribution DummyCountDistribution::point_mass(int64_t k) {
  if (k < 0) throw std::invalid_argument("point_mass: k must be >= 0");
  DummyCountDistribution d;
  d.kind_ = Kind::kPointMass;
  d.describe_ = "point_mass(" + std::to_string(k) + ")";
  d.pmf_.assign(static_cast<size_t>(k) + 1, 0.0);
  d.pmf_[static_cast<size_t>(k)] = 1.0;
  d.is_point_mass_ = true;
  d.point_ = k;
  d.finalize();
  return d;
}

DummyCountDistribution DummyCountDistribution::asymmetric_geometric(double decay,
                                                                    int64_t offset,
                                                                    bool two_sided) {
  if (decay <= 0.0 || decay >= 1.0)
    throw std::invalid_argument("asymmetric_geometric: decay must be in (0, 1)");
  if (offset < 0) throw std::invalid_argument("asymmetric_geometric: offset must be >= 0");
  DummyCountDistribution d;
  d.kind_ = Kind::kAsymmetricGeometric;
  d.describe_ = std::string(two_sided ? "ageom2(" : "ageom1(") + std::to_string(decay) +
                "," + std::to_string(offset) + ")";
  double log_r = std::log(decay);
  // Right tail beyond offset + span has mass < kTailMass.
  int64_t span = static_cast<int64_t>(std::ceil(std::log(kTailMass) / log_r)) + 1;
  if (two_sided) {
    size_t size = static_cast<size_t>(offset + span + 1);
    std::vector<double> w(size);
    double z = 0.0;
    for (size_t c = 0; c < size; ++c) {
      w[c] = std::exp(log_r * std::abs(static_cast<double>(c) - static_cast<double>(offset)));
      z += w[c];
    }
    d.pmf_.resize(size);
    for (size_t c = 0; c < size; ++c) d.pmf_[c] = w[c] / z;
  } else {
    // pmf(offset + j) = (1 - r) r^j; dropped tail mass is r^(span+1) < kTailMass,
    // left unnormalized so the closed-form likelihood ratios stay exact.
    size_t size = static_cast<size_t>(offset + span + 1);
    d.pmf_.assign(size, 0.0);
    double one_minus_r = -std::expm1(log_r);
    for (int64_t j = 0; j <= span; ++j)
      d.pmf_[static_cast<size_t>(offset + j)] = one_minus_r * std::exp(log_r * static_cast<double>(j));
    double deficit = 1.0;
    for (double v : d.pmf_) deficit -= v;
    // Park the sub-1e-18 remainder on the last cell to keep sums exactly 1.
    d.pmf_.back() += std::max(0.0, deficit);
  }
  d.finalize();
  return d;
}

double DummyCountDistribution::pmf_at(int64_t c) const {
  if (c < 0 || c > support_max()) return 0.0;
  return pmf_[static_cast<size_t>(c)];
}

double DummyCountDistribution::tail(int64_t c) const {
  if (c <= 0) return 1.0;
  if (c > support_max()) return 0.0;
  return tail_[static_cast<size_t>(c)];
}

int64_t DummyCountDistribution::tail_threshold(double alpha) const {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("tail_threshold: alpha in [0,1]");
  for (int64_t z = 0; z <= support_max() + 1; ++z)
    if (tail(z) <= alpha) return z;
  return support_max() + 1;
}

int64_t DummyCountDistribution::sample(Rng& rng) const {
  if (is_point_mass_) return point_;
  double u = rng.uniform_real();
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return support_max();
  return static_cast<int64_t>(it - cdf_.begin());
}

int64_t DummyCountDistribution::sample_total(int64_t count, Rng& rng) const {
  if (count < 0) throw std::invalid_argument("sample_total: count must be >= 0");
  if (is_point_mass_) return point_ * count;
  int64_t total = 0;
  for (int64_t i = 0; i < count; ++i) total += sample(rng);
  return total;
}

std::pair<std::vector<double>, std::vector<double>> binary_mechanism_pmfs(
    const DummyCountDistribution& dist, double beta) {
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta must be in [0, 1]");
  size_t size = dist.pmf().size() + 1;
  std::vector<double> p0(size, 0.0), p1(size, 0.0);
  for (size_t c = 0; c < size; ++c) {
    double here = dist.pmf_at(static_cast<int64_t>(c));
    double prev = c > 0 ? dist.pmf_at(static_cast<int64_t>(c) - 1) : 0.0;
    p0[c] = here;
    p1[c] = beta * prev + (1.0 - beta) * here;
  }
  return {std::move(p0), std::move(p1)};
}

double certify_dp(const DummyCountDistribution& dist, double beta, double eps) {
  if (eps < 0.0) throw std::invalid_argument("certify_dp: eps must be >= 0");
  auto [p0, p1] = binary_mechanism_pmfs(dist, beta);
  double e_eps = std::exp(eps);
  double d01 = 0.0, d10 = 0.0;
  for (size_t c = 0; c < p0.size(); ++c) {
    d01 += std::max(0.0, p0[c] - e_eps * p1[c]);
    d10 += std::max(0.0, p1[c] - e_eps * p0[c]);
  }
  return std::max(d01, d10);
}

DummyCountDistribution calibrate_offset(double eps, double delta, double beta) {
  if (eps <= 0.0 && delta <= 0.0)
    throw CalibrationError("calibrate_offset: need eps > 0 or delta > 0");
  if (beta < 0.0 || beta > 1.0) throw CalibrationError("calibrate_offset: beta in [0, 1]");
  double r = std::exp(-eps);
  if (delta <= 0.0) {
    if (beta >= 1.0)
      throw CalibrationError("calibrate_offset: pure DP is infeasible at beta = 1");
    if (beta > 1.0 - r + 1e-12)
      throw CalibrationError(
          "calibrate_offset: pure DP needs beta <= 1 - e^-eps for this family");
    auto d = DummyCountDistribution::asymmetric_geometric(r, 0, /*two_sided=*/false);
    // Analytically exact; rounding can leave residue on the last ulp.
    if (certify_dp(d, beta, eps) > 1e-15)
      throw CalibrationError("calibrate_offset: certification failed unexpectedly");
    return d;
  }
  // Two-sided shape; delta(mu0) decreases by a factor e^-eps per unit offset,
  // so scan upward from an analytic starting point.
  int64_t start = 0;
  {
    double z_norm = (1.0 + r) / (1.0 - r);
    double guess = std::log(delta * z_norm) / std::log(r) - 4.0;
    if (guess > 0.0) start = static_cast<int64_t>(guess);
  }
  int64_t last_fail = start - 1;
  for (int64_t mu0 = start;; ++mu0) {
    auto d = DummyCountDistribution::asymmetric_geometric(r, mu0, /*two_sided=*/true);
    if (certify_dp(d, beta, eps) <= delta) {
      // Ensure minimality even if the analytic start overshot.
      while (mu0 > 0 && mu0 - 1 > last_fail) {
        auto lower = DummyCountDistribution::asymmetric_geometric(r, mu0 - 1, true);
        if (certify_dp(lower, beta, eps) <= delta) {
          d = std::move(lower);
          --mu0;
        } else {
          break;
        }
      }
      return d;
    }
    last_fail = mu0;
    if (mu0 > start + 100000)
      throw CalibrationError("calibrate_offset: no feasible offset found");
  }
}

int64_t two_sided_geometric(double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("two_sided_geometric: p in [0, 1)");
  if (p == 0.0) return 0;
  // Difference of two iid geometric(failure prob p) variables has
  // Pr[k] = (1-p)/(1+p) * p^|k|.
  return rng.geometric_failures(p) - rng.geometric_failures(p);
}

}  // namespace ashdp::dummy
