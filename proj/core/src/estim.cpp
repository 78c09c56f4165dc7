#include "eqcon/estim.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "eqcon/error.hpp"
#include "eqcon/simplex.hpp"

namespace eqcon {
namespace {

void fill_normal(Rng& rng, Eigen::VectorXd& out) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal(rng);
}

void require_length(const ConstraintSystem& cs, Eigen::Index size) {
  if (size != cs.n_vars()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has length " + std::to_string(size) + ", expected " +
                    std::to_string(cs.n_vars()));
  }
}

Eigen::MatrixXd active_columns(const Eigen::MatrixXd& a, const std::vector<Eigen::Index>& active) {
  Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = a.col(active[c]);
  return out;
}

}  // namespace

std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::Random: return "Random";
    case EstimatorKind::UnconstrainedMarginal: return "UnconstrainedMarginal";
    case EstimatorKind::ConstrainedLayer: return "ConstrainedLayer";
    case EstimatorKind::ConstrainedReparam: return "ConstrainedReparam";
    case EstimatorKind::ConstrainedMarginal: return "ConstrainedMarginal";
    case EstimatorKind::MarginalExpectation: return "MarginalExpectation";
  }
  return "Unknown";
}

EstimatorKind parse_estimator_kind(std::string_view text) {
  for (EstimatorKind kind : kAllEstimators) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::ConfigError, "unknown estimator '" + std::string(text) + "'");
}

Eigen::VectorXd GradEstimate::flat() const {
  Eigen::VectorXd out(grad_mean.size() + grad_scale.size());
  out << grad_mean, grad_scale;
  return out;
}

// ---------------------------------------------------------------------------
// Projections

Eigen::VectorXd project_l2(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat) {
  require_length(cs, z_hat.size());
  const Eigen::MatrixXd& a = cs.matrix_a();
  const Eigen::LLT<Eigen::MatrixXd> gram(a * a.transpose());
  return z_hat + a.transpose() * gram.solve(cs.vector_k() - a * z_hat);
}

Eigen::VectorXd project_l2(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat,
                           const Eigen::Ref<const Eigen::MatrixXd>& weight) {
  require_length(cs, z_hat.size());
  const Eigen::Index n = cs.n_vars();
  if (weight.rows() != n || weight.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "weight must be n x n");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(weight).info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "weight is not positive definite");
  }
  const Eigen::MatrixXd& a = cs.matrix_a();
  const Eigen::MatrixXd w_at = weight * a.transpose();
  const Eigen::LLT<Eigen::MatrixXd> gram(a * w_at);
  return z_hat + w_at * gram.solve(cs.vector_k() - a * z_hat);
}

L1Projection project_l1_detailed(const ConstraintSystem& cs,
                                 const Eigen::Ref<const Eigen::VectorXd>& z_hat) {
  require_length(cs, z_hat.size());
  const Eigen::MatrixXd& a = cs.matrix_a();
  const Eigen::Index n = cs.n_vars();
  const Eigen::VectorXd r = cs.vector_k() - a * z_hat;

  L1Projection out;
  out.point = z_hat;
  if (cs.n_rows() == 1) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      if (std::abs(a(0, j)) > std::abs(a(0, best))) best = j;
    }
    out.point(best) += r(0) / a(0, best);
    out.active = {best};
    return out;
  }

  // minimize 1^T (d+ + d-)  s.t.  A d+ - A d- = r,  d+, d- >= 0
  Eigen::MatrixXd lp_a(a.rows(), 2 * n);
  lp_a << a, -a;
  const LpSolution sol = solve_standard_lp(lp_a, r, Eigen::VectorXd::Ones(2 * n));
  for (Eigen::Index col : sol.basis) out.active.push_back(col % n);
  std::sort(out.active.begin(), out.active.end());
  if (std::adjacent_find(out.active.begin(), out.active.end()) != out.active.end()) {
    throw Error(ErrorCode::LpFailure, "simplex basis repeats a coordinate");
  }
  // Re-solve on the optimal support so feasibility holds to rounding.
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(active_columns(a, out.active));
  const Eigen::VectorXd shift = lu.solve(r);
  if (!shift.allFinite()) throw Error(ErrorCode::LpFailure, "optimal basis is singular");
  for (std::size_t c = 0; c < out.active.size(); ++c) {
    out.point(out.active[c]) += shift(static_cast<Eigen::Index>(c));
  }
  return out;
}

Eigen::VectorXd project_l1(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat) {
  return project_l1_detailed(cs, z_hat).point;
}

Eigen::VectorXd l1_branch_vjp(const ConstraintSystem& cs, const std::vector<Eigen::Index>& active,
                              const Eigen::Ref<const Eigen::VectorXd>& g) {
  const Eigen::MatrixXd& a = cs.matrix_a();
  Eigen::VectorXd g_active(static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c) g_active(static_cast<Eigen::Index>(c)) = g(active[c]);
  const Eigen::MatrixXd a_active = active_columns(a, active);
  const Eigen::VectorXd w = a_active.transpose().partialPivLu().solve(g_active);
  return g - a.transpose() * w;
}

// ---------------------------------------------------------------------------
// Gaussian estimators

GaussianGradientEstimator::GaussianGradientEstimator(GaussianParams params, ConstraintSystem cs,
                                                     Eigen::VectorXd target, LossKind loss)
    : params_(std::move(params)),
      cs_(std::move(cs)),
      target_(std::move(target)),
      loss_(loss),
      cg_(params_, cs_),
      map_(params_, cs_) {
  if (target_.size() != cs_.n_vars()) {
    throw Error(ErrorCode::DimensionMismatch, "target length does not match the constraint");
  }
  if (!cs_.is_satisfied(target_)) {
    throw Error(ErrorCode::InfeasibleTarget, "target does not satisfy A y = k");
  }
}

ParamGradient GaussianGradientEstimator::ground_truth() const {
  return grad_expected_loss_gaussian(params_, cs_, target_, loss_);
}

Eigen::VectorXd GaussianGradientEstimator::reparam_noise(Rng& rng) const {
  Eigen::VectorXd eps(params_.dim());
  fill_normal(rng, eps);
  return eps;
}

// d loss / d scale through z_hat = mean + L eps, given d loss / d z_hat.
Eigen::VectorXd GaussianGradientEstimator::reparam_scale_grad(const Eigen::VectorXd& g_hat,
                                                              const Eigen::VectorXd& eps) const {
  if (params_.is_diagonal()) {
    return g_hat.cwiseProduct(params_.cholesky_factor().diagonal()).cwiseProduct(eps);
  }
  const Eigen::Index n = params_.dim();
  Eigen::VectorXd out(params_.n_scale_params());
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) out(t++) = g_hat(i) * eps(j);
  }
  return out;
}

Eigen::VectorXd GaussianGradientEstimator::forward_sample(EstimatorKind kind, Rng& rng) const {
  switch (kind) {
    case EstimatorKind::ConstrainedReparam: {
      const Eigen::VectorXd z_hat = params_.mean() + params_.cholesky_factor() * reparam_noise(rng);
      return z_hat + map_.gain * (cs_.vector_k() - cs_.matrix_a() * z_hat);
    }
    case EstimatorKind::ConstrainedLayer: {
      const Eigen::VectorXd z_hat = params_.mean() + params_.cholesky_factor() * reparam_noise(rng);
      return project_l1(cs_, z_hat);
    }
    default: {
      Eigen::VectorXd eps(cg_.sqrt_factor().cols());
      fill_normal(rng, eps);
      return cg_.sample_from(eps);
    }
  }
}

void GaussianGradientEstimator::accumulate(EstimatorKind kind, Rng& rng, Eigen::VectorXd& mean_acc,
                                           Eigen::VectorXd& scale_acc) const {
  const Eigen::Index n = params_.dim();
  switch (kind) {
    case EstimatorKind::Random: {
      Eigen::VectorXd m(n);
      Eigen::VectorXd s(params_.n_scale_params());
      fill_normal(rng, m);
      fill_normal(rng, s);
      mean_acc += m;
      scale_acc += s;
      return;
    }
    case EstimatorKind::UnconstrainedMarginal: {
      // proxy m_i = N(z_i; mu_i, Sigma_ii) with z frozen
      const Eigen::VectorXd z = forward_sample(kind, rng);
      const Eigen::VectorXd g = pointwise_loss_grad(z, target_, loss_);
      Eigen::VectorXd d_var(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = params_.covariance()(i, i);
        const double d = z(i) - params_.mean()(i);
        const double pdf = normal_pdf(z(i), params_.mean()(i), v);
        mean_acc(i) += g(i) * pdf * d / v;
        d_var(i) = g(i) * pdf * (d * d / (2.0 * v * v) - 1.0 / (2.0 * v));
      }
      scale_acc += pullback_covariance(params_, d_var.asDiagonal().toDenseMatrix());
      return;
    }
    case EstimatorKind::ConstrainedMarginal: {
      // proxy m_i = N(z_i; cond_mean_i, cond_var_i) with z frozen
      const Eigen::VectorXd z = forward_sample(kind, rng);
      const Eigen::VectorXd g = pointwise_loss_grad(z, target_, loss_);
      Eigen::VectorXd d_mean(n);
      Eigen::VectorXd d_var(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double pdf = cg_.marginal_pdf(i, z(i));
        const double v = cg_.marg_vars()(i);
        const double d = z(i) - cg_.marg_means()(i);
        d_mean(i) = g(i) * pdf * d / v;
        d_var(i) = g(i) * pdf * (d * d / (2.0 * v * v) - 1.0 / (2.0 * v));
      }
      const ParamGradient pg = pullback_marginals(params_, cs_, map_, d_mean, d_var);
      mean_acc += pg.mean;
      scale_acc += pg.scale;
      return;
    }
    case EstimatorKind::MarginalExpectation: {
      const Eigen::VectorXd z = forward_sample(kind, rng);
      const Eigen::VectorXd g = pointwise_loss_grad(z, target_, loss_);
      const ParamGradient pg =
          pullback_marginals(params_, cs_, map_, g, Eigen::VectorXd::Zero(n));
      mean_acc += pg.mean;
      scale_acc += pg.scale;
      return;
    }
    case EstimatorKind::ConstrainedReparam: {
      // z = J z_hat + gain k; the gain itself depends on Sigma.
      const Eigen::VectorXd eps = reparam_noise(rng);
      const Eigen::VectorXd z_hat = params_.mean() + params_.cholesky_factor() * eps;
      const Eigen::VectorXd z = z_hat + map_.gain * (cs_.vector_k() - cs_.matrix_a() * z_hat);
      const Eigen::VectorXd g = pointwise_loss_grad(z, target_, loss_);
      const Eigen::VectorXd q = map_.projector.transpose() * g;
      const Eigen::VectorXd u = map_.weighted_residual(z_hat, cs_);
      mean_acc += q;
      scale_acc += reparam_scale_grad(q, eps);
      scale_acc += pullback_covariance(params_, q * u.transpose());
      return;
    }
    case EstimatorKind::ConstrainedLayer: {
      const Eigen::VectorXd eps = reparam_noise(rng);
      const Eigen::VectorXd z_hat = params_.mean() + params_.cholesky_factor() * eps;
      const L1Projection proj = project_l1_detailed(cs_, z_hat);
      const Eigen::VectorXd g = pointwise_loss_grad(proj.point, target_, loss_);
      const Eigen::VectorXd g_hat = l1_branch_vjp(cs_, proj.active, g);
      mean_acc += g_hat;
      scale_acc += reparam_scale_grad(g_hat, eps);
      return;
    }
  }
}

GradEstimate GaussianGradientEstimator::estimate(EstimatorKind kind, Rng& rng,
                                                 Eigen::Index n_samples) const {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
  GradEstimate out;
  out.grad_mean = Eigen::VectorXd::Zero(params_.dim());
  out.grad_scale = Eigen::VectorXd::Zero(params_.n_scale_params());
  for (Eigen::Index s = 0; s < n_samples; ++s) accumulate(kind, rng, out.grad_mean, out.grad_scale);
  const auto inv = 1.0 / static_cast<double>(n_samples);
  out.grad_mean *= inv;
  out.grad_scale *= inv;
  out.samples_used = n_samples;
  return out;
}

GradEstimate estimate_grad(EstimatorKind kind, const GaussianParams& params,
                           const ConstraintSystem& cs, const Eigen::Ref<const Eigen::VectorXd>& y,
                           LossKind loss_kind, Rng& rng, Eigen::Index n_samples) {
  const GaussianGradientEstimator estimator(params, cs, y, loss_kind);
  return estimator.estimate(kind, rng, n_samples);
}

// ---------------------------------------------------------------------------
// Poisson estimators

PoissonGradientEstimator::PoissonGradientEstimator(ExactlyK law, CountVector target, LossKind loss)
    : law_(std::move(law)), target_(std::move(target)), loss_(loss) {
  if (target_.size() != law_.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "target length does not match the rates");
  }
  if ((target_.array() < 0).any() || target_.sum() != law_.total()) {
    throw Error(ErrorCode::InfeasibleTarget, "target counts must be non-negative and sum to k");
  }
}

Eigen::VectorXd PoissonGradientEstimator::ground_truth() const {
  return grad_expected_loss_poisson(law_, target_, loss_);
}

GradEstimate PoissonGradientEstimator::estimate(EstimatorKind kind, Rng& rng,
                                                Eigen::Index n_samples) const {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
  if (std::find(kPoissonEstimators.begin(), kPoissonEstimators.end(), kind) ==
      kPoissonEstimators.end()) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(to_string(kind)) + " is not defined for the Poisson family");
  }
  const Eigen::Index n = law_.dim();
  const std::int64_t k = law_.total();
  const auto kd = static_cast<double>(k);
  const Eigen::VectorXd& p = law_.probs();
  const Eigen::VectorXd target = target_.cast<double>();

  GradEstimate out;
  out.grad_scale = Eigen::VectorXd::Zero(n);
  CountVector z(n);
  Eigen::VectorXd draw(n);
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    if (kind == EstimatorKind::Random) {
      fill_normal(rng, draw);
      out.grad_scale += draw;
      continue;
    }
    law_.draw(rng, z);
    const Eigen::VectorXd g = pointwise_loss_grad(z.cast<double>(), target, loss_);
    switch (kind) {
      case EstimatorKind::UnconstrainedMarginal:
        // d/d log(rate) of the Poisson pmf: pmf * (z - rate)
        for (Eigen::Index i = 0; i < n; ++i) {
          const double rate = law_.rates()(i);
          out.grad_scale(i) += g(i) * poisson_pmf(z(i), rate) * (static_cast<double>(z(i)) - rate);
        }
        break;
      case EstimatorKind::ConstrainedMarginal: {
        Eigen::VectorXd d_prob(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double var = p(i) * (1.0 - p(i));
          d_prob(i) = var > 0.0 ? g(i) * binomial_pmf(z(i), k, p(i)) *
                                      (static_cast<double>(z(i)) - kd * p(i)) / var
                                : 0.0;
        }
        out.grad_scale += pullback_probabilities(law_, d_prob);
        break;
      }
      case EstimatorKind::MarginalExpectation:
        out.grad_scale += pullback_probabilities(law_, kd * g);
        break;
      default:
        break;
    }
  }
  out.grad_scale /= static_cast<double>(n_samples);
  out.samples_used = n_samples;
  return out;
}

}  // namespace eqcon
