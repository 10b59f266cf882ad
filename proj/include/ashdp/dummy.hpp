#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ashdp/rng.hpp"

namespace ashdp::dummy {

// (eps, delta) pair, optionally split across the two mechanisms of a
// two-stage protocol. The split must sum to the total.
struct PrivacyBudget {
  double eps = 0.0;
  double delta = 0.0;
  std::optional<std::pair<double, double>> part1;  // (eps1, delta1)
  std::optional<std::pair<double, double>> part2;  // (eps2, delta2)

  static PrivacyBudget total(double eps, double delta);
  // Splits eps and delta by `fraction` into part1, the rest into part2.
  static PrivacyBudget split(double eps, double delta, double fraction = 0.5);
  void validate() const;
};

// Distribution over non-negative integers used for dummy-record counts.
// The pmf is materialized over a finite support; the dropped right tail has
// mass below 1e-18 so truncation cannot flip a certification at delta=1e-12.
class DummyCountDistribution {
 public:
  enum class Kind { kBinomial, kAsymmetricGeometric, kPointMass };

  static DummyCountDistribution binomial(int64_t m, double p);
  static DummyCountDistribution point_mass(int64_t k);
  // Geometric decay r shifted by offset mu0. The one-sided shape
  // (pmf ~ r^(c - mu0) for c >= mu0) pairs with beta = 1 - r for pure DP;
  // the two-sided shape (pmf ~ r^|c - mu0| truncated to c >= 0) is the
  // workhorse for beta = 1.
  static DummyCountDistribution asymmetric_geometric(double decay, int64_t offset,
                                                     bool two_sided);

  Kind kind() const { return kind_; }
  const std::string& describe() const { return describe_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  const std::vector<double>& pmf() const { return pmf_; }
  int64_t support_max() const { return static_cast<int64_t>(pmf_.size()) - 1; }

  double pmf_at(int64_t c) const;
  // Pr[z >= c].
  double tail(int64_t c) const;
  // Smallest z_th with Pr[z >= z_th] <= alpha.
  int64_t tail_threshold(double alpha) const;

  int64_t sample(Rng& rng) const;
  // Sum of `count` independent draws. Point masses short-circuit.
  int64_t sample_total(int64_t count, Rng& rng) const;

 private:
  DummyCountDistribution() = default;
  void finalize();

  Kind kind_ = Kind::kPointMass;
  std::string describe_;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  std::vector<double> tail_;
  double mean_ = 0.0;
  double variance_ = 0.0;
  bool is_point_mass_ = false;
  int64_t point_ = 0;
};

// Output pmfs of the binary input mechanism M_{D,beta}(x) = alpha*x + z with
// alpha ~ Ber(beta), z ~ D. Returns (P0, P1) over {0, .., support_max + 1}.
std::pair<std::vector<double>, std::vector<double>> binary_mechanism_pmfs(
    const DummyCountDistribution& dist, double beta);

// Tight delta(eps) for M_{D,beta}: max over both input orderings of
// sum_c max(0, P_a(c) - e^eps * P_b(c)). Nonincreasing in eps.
double certify_dp(const DummyCountDistribution& dist, double beta, double eps);

struct CalibrationError : std::runtime_error {
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal-offset asymmetric geometric achieving certify_dp(D, beta, eps) <= delta.
// delta == 0 requires beta <= 1 - e^-eps (one-sided shape, offset 0).
DummyCountDistribution calibrate_offset(double eps, double delta, double beta);

// Two-sided geometric on Z with Pr[k] proportional to p^|k|.
int64_t two_sided_geometric(double p, Rng& rng);

}  // namespace ashdp::dummy
