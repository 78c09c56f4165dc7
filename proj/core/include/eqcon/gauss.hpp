#pragma once

#include <Eigen/Dense>

#include "eqcon/constraint.hpp"
#include "eqcon/random.hpp"

namespace eqcon {

/// Multivariate normal N(mean, covariance) over the unconstrained latent.
///
/// Two storage forms: diagonal (the VAE-style mean / per-coordinate scale)
/// and full SPD. Both keep a lower Cholesky factor L with L L^T = covariance,
/// which for the diagonal form is diag(sigma).
///
/// The unconstrained parameter vector used for gradients is
///   diagonal: (mean, log sigma)               2n entries
///   full:     (mean, vech(L)) row-major lower  n + n(n+1)/2 entries
class GaussianParams {
 public:
  static GaussianParams diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances);
  static GaussianParams full(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  /// Inverse of `scale_params()`: rebuilds the law from (mean, scale params).
  static GaussianParams from_scale_params(Eigen::VectorXd mean,
                                          const Eigen::Ref<const Eigen::VectorXd>& scale,
                                          bool diagonal);

  Eigen::Index dim() const noexcept { return mean_.size(); }
  bool is_diagonal() const noexcept { return diagonal_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }
  const Eigen::MatrixXd& cholesky_factor() const noexcept { return chol_; }
  Eigen::VectorXd variances() const { return cov_.diagonal(); }

  Eigen::Index n_scale_params() const noexcept;
  Eigen::VectorXd scale_params() const;

 private:
  GaussianParams() = default;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  bool diagonal_ = true;
};

/// Quantities shared by conditioning, closed-form losses and estimators.
///
/// With M = A Sigma A^T, gain = Sigma A^T M^-1 and
/// projector = I - gain A. The conditional mean is affine in the mean with
/// Jacobian `projector`, and cond_cov = projector Sigma.
struct ConditioningMap {
  Eigen::MatrixXd sigma_at;   // Sigma A^T, n x a
  Eigen::LLT<Eigen::MatrixXd> gram_llt;  // Cholesky of A Sigma A^T
  Eigen::MatrixXd gain;       // n x a
  Eigen::MatrixXd projector;  // n x n
  Eigen::VectorXd cond_mean;
  Eigen::MatrixXd cond_cov;

  /// Throws Error{DimensionMismatch | IllConditioned}. The gram condition
  /// number limit is 1e12.
  ConditioningMap(const GaussianParams& params, const ConstraintSystem& cs);

  /// A^T M^-1 (k - A x): the direction along which the conditional mean
  /// responds to covariance changes when x is the mean.
  Eigen::VectorXd weighted_residual(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const ConstraintSystem& cs) const;
};

inline constexpr double kMaxGramCondition = 1e12;
inline constexpr double kEigenClampRatio = 1e-12;
inline constexpr double kDegenerateVarianceRatio = 1e-12;

/// The law of z ~ N(mu, Sigma) restricted to A z = k, kept in the full
/// n-dimensional coordinates. Immutable.
class ConditionedGaussian {
 public:
  ConditionedGaussian(GaussianParams params, ConstraintSystem cs);

  const GaussianParams& source() const noexcept { return source_; }
  const ConstraintSystem& constraint() const noexcept { return constraint_; }
  const Eigen::VectorXd& cond_mean() const noexcept { return cond_mean_; }
  const Eigen::MatrixXd& cond_cov() const noexcept { return cond_cov_; }
  /// n x (n - a) with sqrt_factor * sqrt_factor^T = cond_cov.
  const Eigen::MatrixXd& sqrt_factor() const noexcept { return sqrt_factor_; }
  const Eigen::VectorXd& marg_means() const noexcept { return cond_mean_; }
  const Eigen::VectorXd& marg_vars() const noexcept { return marg_vars_; }
  Eigen::Index dim() const noexcept { return cond_mean_.size(); }

  /// Number of eigenvalues of cond_cov clamped to zero. Equals the number of
  /// constraint rows for a well-posed problem.
  Eigen::Index clamped_eigenvalues() const noexcept { return clamped_; }
  bool has_unexpected_rank() const noexcept { return clamped_ != constraint_.n_rows(); }

  /// `count` exact draws, one per row.
  Eigen::MatrixXd sample(Rng& rng, Eigen::Index count) const;

  /// Draw from a caller-provided standard normal vector of length n - a.
  Eigen::VectorXd sample_from(const Eigen::Ref<const Eigen::VectorXd>& eps) const;

  /// Density of z_i given A z = k. Throws DegenerateMarginal when the
  /// coordinate is pinned by the constraint.
  double marginal_pdf(Eigen::Index i, double z_i) const;

  /// True when coordinate i has (numerically) zero conditional variance.
  bool is_degenerate(Eigen::Index i) const;

 private:
  GaussianParams source_;
  ConstraintSystem constraint_;
  Eigen::VectorXd cond_mean_;
  Eigen::MatrixXd cond_cov_;
  Eigen::MatrixXd sqrt_factor_;
  Eigen::VectorXd marg_vars_;
  Eigen::Index clamped_ = 0;
};

ConditionedGaussian condition(const GaussianParams& params, const ConstraintSystem& cs);

/// Density of the unconstrained coordinate z_i ~ N(mu_i, Sigma_ii).
double unconstrained_pdf(const GaussianParams& params, Eigen::Index i, double z_i);

double normal_pdf(double x, double mean, double variance);

/// The (n - a)-dimensional law of the leading n - a coordinates given A z = k,
/// obtained by selecting them with the first n - a rows of the identity.
struct EliminatedGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

EliminatedGaussian eliminated_form(const GaussianParams& params, const ConstraintSystem& cs);

}  // namespace eqcon
