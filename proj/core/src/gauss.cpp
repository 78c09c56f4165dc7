#include "eqcon/gauss.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "eqcon/error.hpp"

namespace eqcon {
namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
  }
}

void require_index(Eigen::Index i, Eigen::Index n) {
  if (i < 0 || i >= n) {
    throw Error(ErrorCode::DimensionMismatch,
                "coordinate " + std::to_string(i) + " out of range for dimension " +
                    std::to_string(n));
  }
}

// Minimum-norm shift moving x onto {A x = k}; removes rounding drift.
void snap_to_constraint(Eigen::VectorXd& x, const ConstraintSystem& cs,
                        const Eigen::LLT<Eigen::MatrixXd>& aat) {
  const Eigen::MatrixXd& a = cs.matrix_a();
  x += a.transpose() * aat.solve(cs.vector_k() - a * x);
}

}  // namespace

double normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

// ---------------------------------------------------------------------------

GaussianParams GaussianParams::diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances) {
  if (mean.size() < 1 || mean.size() != variances.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mean and variances must have equal, non-zero length");
  }
  require_finite(mean, "mean");
  require_finite(variances, "variances");
  if ((variances.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "variances must be strictly positive");
  }
  GaussianParams p;
  p.diagonal_ = true;
  p.mean_ = std::move(mean);
  p.cov_ = variances.asDiagonal();
  p.chol_ = variances.cwiseSqrt().asDiagonal();
  return p;
}

GaussianParams GaussianParams::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  const Eigen::Index n = mean.size();
  if (n < 1 || covariance.rows() != n || covariance.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "covariance must be n x n for a mean of length n");
  }
  require_finite(mean, "mean");
  require_finite(covariance, "covariance");
  const double scale = covariance.cwiseAbs().maxCoeff();
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw Error(ErrorCode::InvalidArgument, "covariance is not symmetric");
  }
  covariance = 0.5 * (covariance + covariance.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "covariance is not positive definite");
  }
  GaussianParams p;
  p.diagonal_ = false;
  p.mean_ = std::move(mean);
  p.chol_ = llt.matrixL();
  p.cov_ = std::move(covariance);
  return p;
}

GaussianParams GaussianParams::from_scale_params(Eigen::VectorXd mean,
                                                 const Eigen::Ref<const Eigen::VectorXd>& scale,
                                                 bool diagonal) {
  const Eigen::Index n = mean.size();
  if (diagonal) {
    if (scale.size() != n) {
      throw Error(ErrorCode::DimensionMismatch, "expected one log-scale per coordinate");
    }
    return GaussianParams::diagonal(std::move(mean), (2.0 * scale.array()).exp().matrix());
  }
  if (scale.size() != n * (n + 1) / 2) {
    throw Error(ErrorCode::DimensionMismatch, "expected n(n+1)/2 Cholesky entries");
  }
  require_finite(mean, "mean");
  require_finite(scale, "Cholesky factor");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) l(i, j) = scale(t++);
  }
  if ((l.diagonal().array() == 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "Cholesky factor is singular");
  }
  GaussianParams p;
  p.diagonal_ = false;
  p.mean_ = std::move(mean);
  p.cov_ = l * l.transpose();
  p.chol_ = std::move(l);
  return p;
}

Eigen::Index GaussianParams::n_scale_params() const noexcept {
  const Eigen::Index n = dim();
  return diagonal_ ? n : n * (n + 1) / 2;
}

Eigen::VectorXd GaussianParams::scale_params() const {
  const Eigen::Index n = dim();
  if (diagonal_) return chol_.diagonal().array().log().matrix();
  Eigen::VectorXd out(n_scale_params());
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) out(t++) = chol_(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------

ConditioningMap::ConditioningMap(const GaussianParams& params, const ConstraintSystem& cs) {
  const Eigen::Index n = params.dim();
  if (cs.n_vars() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "constraint has " + std::to_string(cs.n_vars()) +
                    " variables but the Gaussian has dimension " + std::to_string(n));
  }
  const Eigen::MatrixXd& a = cs.matrix_a();
  if (params.is_diagonal()) {
    sigma_at = params.covariance().diagonal().asDiagonal() * a.transpose();
  } else {
    sigma_at = params.covariance() * a.transpose();
  }
  Eigen::MatrixXd gram = a * sigma_at;
  gram = 0.5 * (gram + gram.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
    throw Error(ErrorCode::IllConditioned,
                "A Sigma A^T has condition number above 1e12 (eigenvalues " +
                    std::to_string(lo) + " .. " + std::to_string(hi) + ")");
  }
  gram_llt.compute(gram);
  gain = gram_llt.solve(sigma_at.transpose()).transpose();
  projector = Eigen::MatrixXd::Identity(n, n) - gain * a;
  cond_mean = params.mean() + gain * (cs.vector_k() - a * params.mean());
  if (params.is_diagonal()) {
    cond_cov = projector * params.covariance().diagonal().asDiagonal();
  } else {
    cond_cov = projector * params.covariance();
  }
  cond_cov = 0.5 * (cond_cov + cond_cov.transpose()).eval();
}

Eigen::VectorXd ConditioningMap::weighted_residual(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                   const ConstraintSystem& cs) const {
  const Eigen::MatrixXd& a = cs.matrix_a();
  return a.transpose() * gram_llt.solve(cs.vector_k() - a * x);
}

// ---------------------------------------------------------------------------

ConditionedGaussian::ConditionedGaussian(GaussianParams params, ConstraintSystem cs)
    : source_(std::move(params)), constraint_(std::move(cs)) {
  const ConditioningMap map(source_, constraint_);
  const Eigen::Index n = source_.dim();
  const Eigen::Index free_dims = n - constraint_.n_rows();
  const Eigen::MatrixXd& a = constraint_.matrix_a();
  const Eigen::LLT<Eigen::MatrixXd> aat(a * a.transpose());

  cond_mean_ = map.cond_mean;
  snap_to_constraint(cond_mean_, constraint_, aat);
  cond_cov_ = map.cond_cov;
  marg_vars_ = cond_cov_.diagonal().cwiseMax(0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cond_cov_);
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double threshold = kEigenClampRatio * std::max(lambda(n - 1), 0.0);
  clamped_ = (lambda.array() <= threshold).count();

  sqrt_factor_ = eig.eigenvectors().rightCols(free_dims) *
                 lambda.tail(free_dims).cwiseMax(0.0).cwiseSqrt().asDiagonal();
  // Remove the rounding-level component along the constraint normals.
  sqrt_factor_ -= a.transpose() * aat.solve(a * sqrt_factor_);
}

Eigen::MatrixXd ConditionedGaussian::sample(Rng& rng, Eigen::Index count) const {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
  const Eigen::Index n = dim();
  const Eigen::Index free_dims = sqrt_factor_.cols();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(count, n);
  Eigen::VectorXd eps(free_dims);
  for (Eigen::Index r = 0; r < count; ++r) {
    for (Eigen::Index j = 0; j < free_dims; ++j) eps(j) = normal(rng);
    out.row(r) = (cond_mean_ + sqrt_factor_ * eps).transpose();
  }
  return out;
}

Eigen::VectorXd ConditionedGaussian::sample_from(const Eigen::Ref<const Eigen::VectorXd>& eps) const {
  if (eps.size() != sqrt_factor_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "noise vector must have length n - a");
  }
  return cond_mean_ + sqrt_factor_ * eps;
}

bool ConditionedGaussian::is_degenerate(Eigen::Index i) const {
  require_index(i, dim());
  return marg_vars_(i) < kDegenerateVarianceRatio * source_.covariance()(i, i);
}

double ConditionedGaussian::marginal_pdf(Eigen::Index i, double z_i) const {
  if (is_degenerate(i)) {
    throw Error(ErrorCode::DegenerateMarginal,
                "coordinate " + std::to_string(i) + " is fixed by the constraint");
  }
  return normal_pdf(z_i, cond_mean_(i), marg_vars_(i));
}

ConditionedGaussian condition(const GaussianParams& params, const ConstraintSystem& cs) {
  return ConditionedGaussian(params, cs);
}

double unconstrained_pdf(const GaussianParams& params, Eigen::Index i, double z_i) {
  require_index(i, params.dim());
  return normal_pdf(z_i, params.mean()(i), params.covariance()(i, i));
}

EliminatedGaussian eliminated_form(const GaussianParams& params, const ConstraintSystem& cs) {
  const Eigen::Index n = params.dim();
  if (cs.n_vars() != n) {
    throw Error(ErrorCode::DimensionMismatch, "constraint / Gaussian dimension mismatch");
  }
  const Eigen::Index m = n - cs.n_rows();
  const Eigen::MatrixXd& a = cs.matrix_a();
  const Eigen::MatrixXd& sigma = params.covariance();
  const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(n, n).topRows(m);

  const Eigen::MatrixXd gram = a * sigma * a.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const Eigen::MatrixXd e_sigma_at = e * sigma * a.transpose();

  EliminatedGaussian out;
  out.mean = e * params.mean() + e_sigma_at * llt.solve(cs.vector_k() - a * params.mean());
  out.covariance = e * sigma * e.transpose() - e_sigma_at * llt.solve(a * sigma * e.transpose());
  return out;
}

}  // namespace eqcon
