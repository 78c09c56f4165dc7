#include <doctest.h>

#include <cmath>
#include <set>

#include "eqcon/discrete.hpp"
#include "eqcon/error.hpp"
#include "support/oracles.hpp"

using namespace eqcon;

TEST_CASE("multinomial pmf") {
  const ExactlyK two(Eigen::Vector2d(1.0, 1.0), 2);
  CHECK(two.constrained_pmf(CountVector{{1, 1}}) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(two.constrained_pmf(CountVector{{2, 1}}) == 0.0);
  const ExactlyK empty(Eigen::Vector3d(1.0, 2.0, 3.0), 0);
  CHECK(empty.constrained_pmf(CountVector{{0, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("binomial marginals") {
  const ExactlyK two(Eigen::Vector2d(1.0, 1.0), 2);
  CHECK(two.marginal_pmf(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(two.marginal_pmf(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(two.marginal_pmf(0, 2) == doctest::Approx(0.25).epsilon(1e-14));
  const ExactlyK skew(Eigen::Vector2d(1.0, 3.0), 4);
  CHECK(skew.marginal_pmf(0, 1) == doctest::Approx(0.421875).epsilon(1e-14));
  CHECK_THROWS_AS((void)skew.marginal_pmf(0, 5), Error);
  CHECK_THROWS_AS(ExactlyK(Eigen::Vector2d(1.0, 1e-320), 3), Error);
  CHECK_THROWS_AS(ExactlyK(Eigen::Vector2d(1.0, -1.0), 3), Error);
  CHECK_THROWS_AS(ExactlyK(Eigen::Vector2d(1.0, 1.0), -1), Error);
}

TEST_CASE("marginal expectations") {
  const ExactlyK two(Eigen::Vector2d(1.0, 1.0), 2);
  CHECK(two.marginal_expectation(0) == 1.0);
  CHECK(two.marginal_expectation(1) == 1.0);
  const ExactlyK skew(Eigen::Vector2d(1.0, 3.0), 4);
  CHECK(skew.marginal_expectation(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(skew.marginal_expectation(1) == doctest::Approx(3.0).epsilon(1e-15));
  const ExactlyK none(Eigen::Vector3d(2.0, 2.0, 2.0), 0);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(none.marginal_expectation(i) == 0.0);
}

TEST_CASE("agreement with the restricted product-Poisson law") {
  const Eigen::VectorXd rate_sets[] = {Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(0.7, 3.1),
                                       Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.5, 4.5, 1.3)};
  for (const auto& rates : rate_sets) {
    for (std::int64_t k = 0; k <= 6; ++k) {
      const ExactlyK law(rates, k);
      const std::vector<double> ref = oracle::restricted_product_poisson(rates, k);
      double tv = 0.0;
      double mass = 0.0;
      std::size_t idx = 0;
      Eigen::MatrixXd marg = Eigen::MatrixXd::Zero(rates.size(), k + 1);
      oracle::compositions(rates.size(), k, [&](const oracle::Counts& z) {
        const double p = law.constrained_pmf(z);
        tv += std::abs(p - ref[idx]);
        mass += p;
        for (Eigen::Index i = 0; i < z.size(); ++i) marg(i, z(i)) += ref[idx];
        ++idx;
      });
      CHECK(0.5 * tv <= 1e-12);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
      double total_mean = 0.0;
      for (Eigen::Index i = 0; i < rates.size(); ++i) {
        for (std::int64_t v = 0; v <= k; ++v) CHECK(std::abs(law.marginal_pmf(i, v) - marg(i, v)) <= 1e-12);
        total_mean += law.marginal_expectation(i);
      }
      CHECK(std::abs(total_mean - static_cast<double>(k)) <= 1e-14 * std::max<double>(1.0, k));
    }
  }
}

TEST_CASE("sampling support and totals") {
  const ExactlyK two(Eigen::Vector2d(1.0, 1.0), 2);
  Rng rng(9);
  const CountMatrix draws = two.sample(rng, 2000);
  std::set<std::int64_t> firsts;
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    CHECK(draws.row(r).sum() == 2);
    CHECK(draws.row(r).minCoeff() >= 0);
    firsts.insert(draws(r, 0));
  }
  CHECK(firsts == std::set<std::int64_t>{0, 1, 2});

  const ExactlyK none(Eigen::Vector3d(1.0, 2.0, 3.0), 0);
  CHECK(none.sample(rng, 10).isZero());
}

TEST_CASE("sample mean of a million draws") {
  const ExactlyK skew(Eigen::Vector2d(1.0, 3.0), 4);
  Rng rng(123);
  const CountMatrix draws = skew.sample(rng, 1000000);
  const double mean = static_cast<double>(draws.col(0).sum()) / 1e6;
  CHECK(std::abs(mean - 1.0) <= 3.0 * std::sqrt(4.0 * 0.25 * 0.75 / 1e6));
}

TEST_CASE("sampling is deterministic") {
  const ExactlyK law(Eigen::Vector3d(0.5, 1.5, 4.0), 40);
  Rng a(17);
  Rng b(17);
  CHECK(law.sample(a, 100) == law.sample(b, 100));
}

TEST_CASE("large totals stay finite") {
  const ExactlyK law(Eigen::Vector3d(1.0, 2.0, 7.0), 10000);
  const double p = law.marginal_pmf(2, 7000);
  CHECK(std::isfinite(p));
  CHECK(p > 0.0);
  CHECK(law.marginal_cdf(2, 10000) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("binomial cdf edges") {
  CHECK(binomial_cdf(-1, 5, 0.3) == 0.0);
  CHECK(binomial_cdf(5, 5, 0.3) == 1.0);
  CHECK(binomial_cdf(0, 5, 0.3) == doctest::Approx(std::pow(0.7, 5)).epsilon(1e-14));
}
