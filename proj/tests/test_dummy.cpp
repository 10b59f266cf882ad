#include <cmath>

#include "ashdp/dummy.hpp"
#include "doctest.h"

using namespace ashdp;
using dummy::DummyCountDistribution;

namespace {

// Independent certifier: direct enumeration over the mechanism pmfs without
// the library's helper structure.
double brute_delta(const std::vector<double>& pmf, double beta, double eps) {
  size_t size = pmf.size() + 1;
  auto p = [&](size_t c) { return c < pmf.size() ? pmf[c] : 0.0; };
  double e_eps = std::exp(eps);
  double d01 = 0, d10 = 0;
  for (size_t c = 0; c < size; ++c) {
    double p0 = p(c);
    double p1 = beta * (c > 0 ? p(c - 1) : 0.0) + (1 - beta) * p(c);
    d01 += std::max(0.0, p0 - e_eps * p1);
    d10 += std::max(0.0, p1 - e_eps * p0);
  }
  return std::max(d01, d10);
}

}  // namespace

TEST_CASE("binomial pmf and moments") {
  auto d = DummyCountDistribution::binomial(2, 0.5);
  REQUIRE(d.pmf().size() == 3);
  CHECK(d.pmf_at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.pmf_at(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.pmf_at(2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.mean() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.variance() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pmf sums to one and matches moments for every family") {
  std::vector<DummyCountDistribution> dists;
  dists.push_back(DummyCountDistribution::binomial(10, 0.3));
  dists.push_back(DummyCountDistribution::point_mass(7));
  dists.push_back(DummyCountDistribution::asymmetric_geometric(std::exp(-0.5), 0, false));
  dists.push_back(DummyCountDistribution::asymmetric_geometric(std::exp(-0.5), 53, true));
  for (const auto& d : dists) {
    double sum = 0, m1 = 0, m2 = 0;
    for (int64_t c = 0; c <= d.support_max(); ++c) {
      sum += d.pmf_at(c);
      m1 += c * d.pmf_at(c);
      m2 += double(c) * c * d.pmf_at(c);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(std::abs(m1 - d.mean()) < 1e-9);
    CHECK(std::abs(m2 - m1 * m1 - d.variance()) < 1e-9);
  }
}

TEST_CASE("binary mechanism pmfs") {
  SUBCASE("no noise, no sampling") {
    auto d = DummyCountDistribution::point_mass(0);
    auto [p0, p1] = dummy::binary_mechanism_pmfs(d, 0.0);
    CHECK(p0 == p1);
    CHECK(p0[0] == 1.0);
  }
  SUBCASE("binomial shift at beta=1") {
    auto d = DummyCountDistribution::binomial(2, 0.5);
    auto [p0, p1] = dummy::binary_mechanism_pmfs(d, 1.0);
    std::vector<double> expected{0, 0.25, 0.5, 0.25};  // hand convolution
    REQUIRE(p1.size() == 4);
    for (size_t c = 0; c < 4; ++c) CHECK(p1[c] == doctest::Approx(expected[c]).epsilon(1e-12));
  }
  SUBCASE("one-sided geometric likelihood ratio") {
    double r = std::exp(-0.5);
    auto d = DummyCountDistribution::asymmetric_geometric(r, 0, false);
    auto [p0, p1] = dummy::binary_mechanism_pmfs(d, 1.0 - r);
    double expected = (1.0 - r + r * r) / r;  // closed form for c >= 1
    for (size_t c = 1; c <= 30; ++c)
      CHECK(p1[c] / p0[c] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("certify_dp matches exhaustive enumeration") {
  auto bin = DummyCountDistribution::binomial(2, 0.5);
  for (double eps : {0.0, 0.3, std::log(2.0), 1.0, 5.0}) {
    double expect = brute_delta(bin.pmf(), 1.0, eps);
    CHECK(dummy::certify_dp(bin, 1.0, eps) == doctest::Approx(expect).epsilon(1e-14));
  }
  // Boundary mass at c = 0 and c = 3 forces delta = 0.25 once eps >= ln 2;
  // below that threshold interior terms still leak (delta(0) = 0.5).
  CHECK(dummy::certify_dp(bin, 1.0, std::log(2.0)) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(dummy::certify_dp(bin, 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(dummy::certify_dp(bin, 1.0, 5.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(dummy::certify_dp(bin, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pure DP of the one-sided geometric at beta = 1 - e^-eps") {
  for (double eps : {0.25, 0.5, 1.0}) {
    double r = std::exp(-eps);
    auto d = DummyCountDistribution::asymmetric_geometric(r, 0, false);
    CHECK(dummy::certify_dp(d, 1.0 - r, eps) <= 1e-15);
  }
}

TEST_CASE("beta = 0 gives delta(0) = 0") {
  auto d = DummyCountDistribution::binomial(3, 0.4);
  CHECK(dummy::certify_dp(d, 0.0, 0.0) == 0.0);
}

TEST_CASE("delta is nonincreasing in eps") {
  auto d = DummyCountDistribution::asymmetric_geometric(std::exp(-0.5), 10, true);
  double prev = 1.0;
  for (double eps = 0.0; eps <= 2.0; eps += 0.1) {
    double cur = dummy::certify_dp(d, 1.0, eps);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("calibrate_offset") {
  SUBCASE("pure DP target needs no offset") {
    double eps = 0.5;
    auto d = dummy::calibrate_offset(eps, 0.0, 1.0 - std::exp(-eps));
    CHECK(d.kind() == DummyCountDistribution::Kind::kAsymmetricGeometric);
    CHECK(dummy::certify_dp(d, 1.0 - std::exp(-eps), eps) <= 1e-15);
    CHECK(d.mean() == doctest::Approx(std::exp(-eps) / (1 - std::exp(-eps))).epsilon(1e-9));
  }
  SUBCASE("approximate target at beta = 1 picks the minimal offset") {
    auto d = dummy::calibrate_offset(0.5, 1e-12, 1.0);
    // Minimality: one offset lower must fail.
    double r = std::exp(-0.5);
    int64_t mu0 = 0;
    for (int64_t c = 0; c <= d.support_max(); ++c)
      if (d.pmf_at(c) > d.pmf_at(mu0)) mu0 = c;
    CHECK(mu0 == 53);
    auto lower = DummyCountDistribution::asymmetric_geometric(r, mu0 - 1, true);
    CHECK(dummy::certify_dp(lower, 1.0, 0.5) > 1e-12);
  }
  SUBCASE("mean lands within a factor 2 of the 108 anchor") {
    // Per-mechanism budget of a total (1, 1e-12) run split evenly: each
    // mechanism certifies at (0.5, 5e-13).
    auto d = dummy::calibrate_offset(0.5, 5e-13, 1.0);
    CHECK(d.mean() >= 108.0 / 2.0);
    CHECK(d.mean() <= 108.0 * 2.0);
  }
  SUBCASE("vacuous privacy") {
    auto d = dummy::calibrate_offset(0.5, 1.0, 1.0);
    CHECK(d.pmf_at(0) == doctest::Approx(d.pmf().front()));
    CHECK(dummy::certify_dp(d, 1.0, 0.5) <= 1.0);
    // Offset 0: the mode sits at the origin.
    CHECK(d.pmf_at(0) >= d.pmf_at(1));
  }
  SUBCASE("infeasible target") {
    CHECK_THROWS_AS(dummy::calibrate_offset(0.5, 0.0, 1.0), dummy::CalibrationError);
  }
}

TEST_CASE("sampling matches the pmf") {
  Rng rng(31);
  SUBCASE("point mass") {
    auto d = DummyCountDistribution::point_mass(3);
    for (int i = 0; i < 100; ++i) CHECK(d.sample(rng) == 3);
  }
  SUBCASE("binomial mean over a million draws") {
    auto d = DummyCountDistribution::binomial(2, 0.5);
    double mean = 0;
    int64_t counts[3] = {0, 0, 0};
    for (int i = 0; i < 1000000; ++i) {
      int64_t v = d.sample(rng);
      mean += static_cast<double>(v);
      counts[v] += 1;
    }
    mean /= 1e6;
    CHECK(std::abs(mean - 1.0) < 0.01);
    // Goodness of fit, df = 2, p = 0.001 cut at 13.8.
    double chi2 = 0;
    double expect[3] = {250000, 500000, 250000};
    for (int c = 0; c < 3; ++c)
      chi2 += (counts[c] - expect[c]) * (counts[c] - expect[c]) / expect[c];
    CHECK(chi2 < 13.8);
  }
  SUBCASE("two-sided geometric normalization") {
    double p = std::exp(-1.0);  // eps = 4
    int64_t zeros = 0, total = 200000;
    for (int64_t i = 0; i < total; ++i)
      zeros += dummy::two_sided_geometric(p, rng) == 0;
    double expect = (1 - p) / (1 + p);
    CHECK(std::abs(zeros / static_cast<double>(total) - expect) < 0.005);
  }
  SUBCASE("sample_total shortcuts point masses") {
    auto d = DummyCountDistribution::point_mass(108);
    CHECK(d.sample_total(1000000000, rng) == 108000000000LL);
  }
}

TEST_CASE("tail thresholds") {
  auto d = DummyCountDistribution::binomial(2, 0.5);
  CHECK(d.tail_threshold(0.05) == 3);  // Pr[z>=2]=0.25 > alpha, Pr[z>=3]=0
  CHECK(d.tail_threshold(0.25) == 2);
  CHECK(d.tail_threshold(1.0) == 0);
}

TEST_CASE("privacy budget split") {
  auto b = dummy::PrivacyBudget::split(1.0, 1e-12, 0.5);
  CHECK(b.part1->first == doctest::Approx(0.5));
  CHECK(b.part2->first == doctest::Approx(0.5));
  CHECK(b.part1->second + b.part2->second == doctest::Approx(1e-12));
  CHECK_THROWS(dummy::PrivacyBudget::split(1.0, 0.0, 1.5));
}
