#include "eqcon/discrete.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "eqcon/error.hpp"

namespace eqcon {
namespace {

constexpr double kMinProbability = 1e-300;

double log_factorial(std::int64_t x) { return std::lgamma(static_cast<double>(x) + 1.0); }

}  // namespace

double binomial_log_pmf(std::int64_t x, std::int64_t trials, double p) {
  if (x < 0 || x > trials) return -std::numeric_limits<double>::infinity();
  // Boundary probabilities would produce 0 * log(0).
  if (p <= 0.0) return x == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return x == trials ? 0.0 : -std::numeric_limits<double>::infinity();
  const auto xd = static_cast<double>(x);
  const auto nd = static_cast<double>(trials);
  return log_factorial(trials) - log_factorial(x) - log_factorial(trials - x) +
         xd * std::log(p) + (nd - xd) * std::log1p(-p);
}

double binomial_pmf(std::int64_t x, std::int64_t trials, double p) {
  return std::exp(binomial_log_pmf(x, trials, p));
}

double binomial_cdf(std::int64_t t, std::int64_t trials, double p) {
  if (t < 0) return 0.0;
  if (t >= trials) return 1.0;
  double acc = 0.0;
  for (std::int64_t x = 0; x <= t; ++x) acc += binomial_pmf(x, trials, p);
  return std::min(acc, 1.0);
}

double poisson_pmf(std::int64_t x, double rate) {
  if (x < 0) return 0.0;
  return std::exp(static_cast<double>(x) * std::log(rate) - rate - log_factorial(x));
}

ExactlyK::ExactlyK(Eigen::VectorXd rates, std::int64_t total)
    : rates_(std::move(rates)), total_(total) {
  if (rates_.size() < 1) throw Error(ErrorCode::DimensionMismatch, "rates must be non-empty");
  if (!rates_.allFinite()) throw Error(ErrorCode::NonFiniteInput, "rates contain NaN or Inf");
  if ((rates_.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "rates must be strictly positive");
  }
  if (total_ < 0) throw Error(ErrorCode::InvalidArgument, "total must be non-negative");
  probs_ = rates_ / rates_.sum();
  if ((probs_.array() < kMinProbability).any()) {
    throw Error(ErrorCode::InvalidArgument,
                "normalized probability below 1e-300; rates span too many orders of magnitude");
  }
  // Computed from the raw rates to avoid cancellation in the running tail.
  split_probs_.resize(dim());
  double tail = rates_.sum();
  for (Eigen::Index i = 0; i < dim(); ++i) {
    split_probs_(i) = std::min(rates_(i) / tail, 1.0);
    tail -= rates_(i);
  }
}

double ExactlyK::constrained_pmf(const Eigen::Ref<const CountVector>& z) const {
  if (z.size() != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "count vector length mismatch");
  }
  if ((z.array() < 0).any() || z.sum() != total_) return 0.0;
  double log_p = log_factorial(total_);
  for (Eigen::Index i = 0; i < dim(); ++i) {
    log_p += static_cast<double>(z(i)) * std::log(probs_(i)) - log_factorial(z(i));
  }
  return std::exp(log_p);
}

double ExactlyK::marginal_pmf(Eigen::Index i, std::int64_t z_i) const {
  if (i < 0 || i >= dim()) throw Error(ErrorCode::DimensionMismatch, "coordinate out of range");
  if (z_i < 0 || z_i > total_) {
    throw Error(ErrorCode::OutOfSupport,
                "count " + std::to_string(z_i) + " outside [0, " + std::to_string(total_) + "]");
  }
  return binomial_pmf(z_i, total_, probs_(i));
}

double ExactlyK::marginal_cdf(Eigen::Index i, std::int64_t t) const {
  if (i < 0 || i >= dim()) throw Error(ErrorCode::DimensionMismatch, "coordinate out of range");
  return binomial_cdf(t, total_, probs_(i));
}

double ExactlyK::marginal_expectation(Eigen::Index i) const {
  if (i < 0 || i >= dim()) throw Error(ErrorCode::DimensionMismatch, "coordinate out of range");
  return static_cast<double>(total_) * probs_(i);
}

void ExactlyK::draw(Rng& rng, Eigen::Ref<CountVector> out) const {
  const Eigen::Index n = dim();
  if (out.size() != n) throw Error(ErrorCode::DimensionMismatch, "output length mismatch");
  std::int64_t remaining = total_;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    std::int64_t x = 0;
    if (remaining > 0) {
      std::binomial_distribution<std::int64_t> binom(remaining, split_probs_(i));
      x = binom(rng);
    }
    out(i) = x;
    remaining -= x;
  }
  out(n - 1) = remaining;
}

CountMatrix ExactlyK::sample(Rng& rng, Eigen::Index count) const {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
  CountMatrix out(count, dim());
  CountVector row(dim());
  for (Eigen::Index r = 0; r < count; ++r) {
    draw(rng, row);
    out.row(r) = row.transpose();
  }
  return out;
}

}  // namespace eqcon
