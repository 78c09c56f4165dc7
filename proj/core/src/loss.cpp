#include "eqcon/loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "eqcon/error.hpp"

namespace eqcon {
namespace {

constexpr double kSqrt2OverPi = std::numbers::sqrt2 * std::numbers::inv_sqrtpi;

void require_feasible_target(const ConstraintSystem& cs,
                             const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != cs.n_vars()) {
    throw Error(ErrorCode::DimensionMismatch, "target length does not match the constraint");
  }
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "target contains NaN or Inf");
  if (!cs.is_satisfied(y, kDefaultFeasibilityTol)) {
    throw Error(ErrorCode::InfeasibleTarget, "target does not satisfy A y = k");
  }
}

void require_feasible_target(const ExactlyK& ek, const Eigen::Ref<const CountVector>& y) {
  if (y.size() != ek.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "target length does not match the rates");
  }
  if ((y.array() < 0).any() || y.sum() != ek.total()) {
    throw Error(ErrorCode::InfeasibleTarget, "target counts must be non-negative and sum to k");
  }
}

// Derivatives of the folded-normal mean f(m, v) = E|N(m, v)|.
struct FoldedTerms {
  double value;
  double d_m;
  double d_v;
};

FoldedTerms folded_normal_terms(double m, double v) {
  if (v <= 0.0) return {std::abs(m), m > 0.0 ? 1.0 : (m < 0.0 ? -1.0 : 0.0), 0.0};
  const double s = std::sqrt(v);
  const double r = m / s;
  const double bump = kSqrt2OverPi * std::exp(-0.5 * r * r);
  const double erf_r = std::erf(r / std::numbers::sqrt2);
  return {s * bump + m * erf_r, erf_r, bump / (2.0 * s)};
}

// Per-coordinate L1 term of the multinomial closed form: E|X - t| for
// X ~ Binomial(k, p), built from the two Todhunter partial sums.
double binomial_abs_deviation(std::int64_t t, std::int64_t k, double p) {
  const auto kd = static_cast<double>(k);
  const auto td = static_cast<double>(t);
  const double d = kd * p - td;
  const double b_t = binomial_pmf(t, k, p);
  const double cdf_t = binomial_cdf(t, k, p);
  // sum_{x<=t} (kp - x) b(x) and sum_{x>=t} (x - kp) b(x)
  const double lower = (kd - td) * p * b_t;
  const double upper = td * (1.0 - p) * b_t;
  // x = t sits in both partial sums; d * b(t) removes the double count.
  return lower + upper + d * b_t - 2.0 * d * cdf_t + d;
}

}  // namespace

std::string_view to_string(LossKind kind) noexcept { return kind == LossKind::L1 ? "L1" : "L2"; }

LossKind parse_loss_kind(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "L1") return LossKind::L1;
  if (upper == "L2") return LossKind::L2;
  throw Error(ErrorCode::ConfigError, "unknown loss kind '" + std::string(text) + "'");
}

Eigen::VectorXd ParamGradient::flat() const {
  Eigen::VectorXd out(mean.size() + scale.size());
  out << mean, scale;
  return out;
}

double pointwise_loss(const Eigen::Ref<const Eigen::VectorXd>& z,
                      const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind) {
  return kind == LossKind::L1 ? (z - y).cwiseAbs().sum() : (z - y).squaredNorm();
}

Eigen::VectorXd pointwise_loss_grad(const Eigen::Ref<const Eigen::VectorXd>& z,
                                    const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind) {
  if (kind == LossKind::L2) return 2.0 * (z - y);
  return (z - y).unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
}

double folded_normal_mean(double m, double s) { return folded_normal_terms(m, s * s).value; }

double expected_loss_gaussian(const ConditionedGaussian& cg,
                              const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind) {
  require_feasible_target(cg.constraint(), y);
  double total = 0.0;
  for (Eigen::Index i = 0; i < cg.dim(); ++i) {
    const double m = cg.marg_means()(i) - y(i);
    const double v = cg.is_degenerate(i) ? 0.0 : cg.marg_vars()(i);
    total += kind == LossKind::L1 ? folded_normal_terms(m, v).value : m * m + v;
  }
  return total;
}

double expected_loss_poisson(const ExactlyK& ek, const Eigen::Ref<const CountVector>& y,
                             LossKind kind) {
  require_feasible_target(ek, y);
  const std::int64_t k = ek.total();
  const auto kd = static_cast<double>(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < ek.dim(); ++i) {
    const double p = ek.probs()(i);
    const auto yi = static_cast<double>(y(i));
    if (kind == LossKind::L2) {
      total += kd * p * (1.0 - p) + kd * kd * p * p - 2.0 * yi * kd * p + yi * yi;
    } else {
      total += binomial_abs_deviation(y(i), k, p);
    }
  }
  return total;
}

Eigen::VectorXd pullback_covariance(const GaussianParams& params,
                                    const Eigen::Ref<const Eigen::MatrixXd>& d_cov) {
  const Eigen::Index n = params.dim();
  if (params.is_diagonal()) {
    // Sigma_ii = exp(2 rho_i)
    return 2.0 * params.covariance().diagonal().cwiseProduct(d_cov.diagonal());
  }
  const Eigen::MatrixXd d_chol = (d_cov + d_cov.transpose()) * params.cholesky_factor();
  Eigen::VectorXd out(params.n_scale_params());
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) out(t++) = d_chol(i, j);
  }
  return out;
}

ParamGradient pullback_marginals(const GaussianParams& params, const ConstraintSystem& cs,
                                 const ConditioningMap& map,
                                 const Eigen::Ref<const Eigen::VectorXd>& d_mean,
                                 const Eigen::Ref<const Eigen::VectorXd>& d_var) {
  // d cond_mean = J d mu + J dSigma u,  d cond_cov = J dSigma J^T,
  // with J = I - Sigma A^T M^-1 A and u = A^T M^-1 (k - A mu).
  const Eigen::MatrixXd& j = map.projector;
  const Eigen::VectorXd q = j.transpose() * d_mean;
  const Eigen::VectorXd u = map.weighted_residual(params.mean(), cs);
  Eigen::MatrixXd d_cov = q * u.transpose();
  if (d_var.cwiseAbs().maxCoeff() > 0.0) {
    d_cov.noalias() += j.transpose() * d_var.asDiagonal() * j;
  }
  return {q, pullback_covariance(params, d_cov)};
}

Eigen::VectorXd pullback_probabilities(const ExactlyK& ek,
                                       const Eigen::Ref<const Eigen::VectorXd>& d_prob) {
  const Eigen::VectorXd& p = ek.probs();
  return p.cwiseProduct(d_prob - Eigen::VectorXd::Constant(p.size(), p.dot(d_prob)));
}

ParamGradient grad_expected_loss_gaussian(const GaussianParams& params,
                                          const ConstraintSystem& cs,
                                          const Eigen::Ref<const Eigen::VectorXd>& y,
                                          LossKind kind) {
  const ConditioningMap map(params, cs);
  require_feasible_target(cs, y);
  const Eigen::Index n = params.dim();
  Eigen::VectorXd d_mean(n);
  Eigen::VectorXd d_var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = map.cond_mean(i) - y(i);
    const double v = map.cond_cov(i, i);
    // Coordinates pinned by the constraint have a variance that does not move.
    const bool pinned = v < kDegenerateVarianceRatio * params.covariance()(i, i);
    if (kind == LossKind::L2) {
      d_mean(i) = 2.0 * m;
      d_var(i) = pinned ? 0.0 : 1.0;
    } else {
      const FoldedTerms f = folded_normal_terms(m, pinned ? 0.0 : v);
      d_mean(i) = f.d_m;
      d_var(i) = f.d_v;
    }
  }
  return pullback_marginals(params, cs, map, d_mean, d_var);
}

Eigen::VectorXd grad_expected_loss_poisson(const ExactlyK& ek,
                                           const Eigen::Ref<const CountVector>& y,
                                           LossKind kind) {
  require_feasible_target(ek, y);
  const std::int64_t k = ek.total();
  const auto kd = static_cast<double>(k);
  Eigen::VectorXd d_prob(ek.dim());
  for (Eigen::Index i = 0; i < ek.dim(); ++i) {
    const double p = ek.probs()(i);
    const auto yi = static_cast<double>(y(i));
    if (kind == LossKind::L2) {
      d_prob(i) = kd * (1.0 - 2.0 * p) + 2.0 * kd * kd * p - 2.0 * yi * kd;
    } else {
      // d/dp E|X - t| = k (1 - 2 P(Y <= t - 1)), Y ~ Binomial(k - 1, p)
      d_prob(i) = k == 0 ? 0.0 : kd * (1.0 - 2.0 * binomial_cdf(y(i) - 1, k - 1, p));
    }
  }
  return pullback_probabilities(ek, d_prob);
}

namespace {

template <typename Draw>
McEstimate welford(Eigen::Index count, Draw&& draw) {
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "Monte-Carlo needs at least 2 samples");
  double mean = 0.0;
  double m2 = 0.0;
  for (Eigen::Index s = 0; s < count; ++s) {
    const double x = draw();
    const double delta = x - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (x - mean);
  }
  const auto n = static_cast<double>(count);
  return {mean, std::sqrt(m2 / (n - 1.0) / n)};
}

}  // namespace

McEstimate mc_expected_loss(const ConditionedGaussian& cg,
                            const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind, Rng& rng,
                            Eigen::Index count) {
  require_feasible_target(cg.constraint(), y);
  std::normal_distribution<double> normal;
  Eigen::VectorXd eps(cg.sqrt_factor().cols());
  return welford(count, [&] {
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = normal(rng);
    return pointwise_loss(cg.sample_from(eps), y, kind);
  });
}

McEstimate mc_expected_loss(const ExactlyK& ek, const Eigen::Ref<const CountVector>& y,
                            LossKind kind, Rng& rng, Eigen::Index count) {
  require_feasible_target(ek, y);
  const Eigen::VectorXd target = y.cast<double>();
  CountVector z(ek.dim());
  return welford(count, [&] {
    ek.draw(rng, z);
    return pointwise_loss(z.cast<double>(), target, kind);
  });
}

}  // namespace eqcon
