#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "eqcon/random.hpp"

namespace eqcon {

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Independent Poisson(rate_i) counts conditioned on sum_i z_i = total.
/// The conditioned law is Multinomial(total, rate / sum(rate)).
class ExactlyK {
 public:
  /// Throws InvalidArgument for non-positive or non-finite rates, a negative
  /// total, or any normalized probability below 1e-300.
  ExactlyK(Eigen::VectorXd rates, std::int64_t total);

  const Eigen::VectorXd& rates() const noexcept { return rates_; }
  const Eigen::VectorXd& probs() const noexcept { return probs_; }
  std::int64_t total() const noexcept { return total_; }
  Eigen::Index dim() const noexcept { return rates_.size(); }

  /// Multinomial pmf; exactly 0 off the simplex sum z = total.
  double constrained_pmf(const Eigen::Ref<const CountVector>& z) const;

  /// Binomial(total, p_i) pmf at z_i. Throws OutOfSupport for z_i outside
  /// [0, total].
  double marginal_pmf(Eigen::Index i, std::int64_t z_i) const;

  /// P(z_i <= t) under Binomial(total, p_i), summed in log space.
  double marginal_cdf(Eigen::Index i, std::int64_t t) const;

  double marginal_expectation(Eigen::Index i) const;

  /// One draw written into `out` (length n) by sequential conditional
  /// binomials.
  void draw(Rng& rng, Eigen::Ref<CountVector> out) const;

  /// `count` rows, each summing to total.
  CountMatrix sample(Rng& rng, Eigen::Index count) const;

 private:
  Eigen::VectorXd rates_;
  Eigen::VectorXd probs_;
  Eigen::VectorXd split_probs_;  // p_i / (p_i + ... + p_{n-1})
  std::int64_t total_;
};

double binomial_log_pmf(std::int64_t x, std::int64_t trials, double p);
double binomial_pmf(std::int64_t x, std::int64_t trials, double p);
/// P(X <= t) for X ~ Binomial(trials, p); 0 for t < 0 and 1 for t >= trials.
double binomial_cdf(std::int64_t t, std::int64_t trials, double p);
double poisson_pmf(std::int64_t x, double rate);

}  // namespace eqcon
