#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "eqcon/discrete.hpp"
#include "eqcon/gauss.hpp"

namespace eqcon {

enum class LossKind { L1, L2 };

std::string_view to_string(LossKind kind) noexcept;
/// Accepts "L1" / "L2" (case-insensitive). Throws ConfigError otherwise.
LossKind parse_loss_kind(std::string_view text);

/// Gradient with respect to the unconstrained parameters (mean, scale). The
/// scale block follows `GaussianParams::scale_params()` for the Gaussian
/// family and holds d/d log(rate) for the Poisson family (mean left empty).
struct ParamGradient {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  Eigen::VectorXd flat() const;
};

// Point-wise losses over a full vector and their gradient in z.
double pointwise_loss(const Eigen::Ref<const Eigen::VectorXd>& z,
                      const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind);
Eigen::VectorXd pointwise_loss_grad(const Eigen::Ref<const Eigen::VectorXd>& z,
                                    const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind);

/// E|X| for X ~ N(m, s^2); |m| when s == 0.
double folded_normal_mean(double m, double s);

/// Sum over coordinates of E[l(z_i, y_i)] under the constrained Gaussian.
/// Throws InfeasibleTarget when A y != k at 1e-9.
double expected_loss_gaussian(const ConditionedGaussian& cg,
                              const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind);

/// Sum over coordinates of E[l(z_i, y_i)] under the multinomial law.
/// Throws InfeasibleTarget unless y >= 0 and sum(y) = total.
double expected_loss_poisson(const ExactlyK& ek, const Eigen::Ref<const CountVector>& y,
                             LossKind kind);

/// Ground-truth gradient of `expected_loss_gaussian` with respect to the
/// unconstrained parameters, chained through the conditioning map.
ParamGradient grad_expected_loss_gaussian(const GaussianParams& params,
                                          const ConstraintSystem& cs,
                                          const Eigen::Ref<const Eigen::VectorXd>& y,
                                          LossKind kind);

/// Gradient of `expected_loss_poisson` with respect to log(rates).
Eigen::VectorXd grad_expected_loss_poisson(const ExactlyK& ek,
                                           const Eigen::Ref<const CountVector>& y, LossKind kind);

/// Pulls per-coordinate sensitivities back to the unconstrained parameters.
///
/// `d_mean(i)` is dF/d cond_mean_i and `d_var(i)` is dF/d cond_var_i for some
/// scalar F of the conditional marginals; the result is dF/d(mean, scale).
ParamGradient pullback_marginals(const GaussianParams& params, const ConstraintSystem& cs,
                                 const ConditioningMap& map,
                                 const Eigen::Ref<const Eigen::VectorXd>& d_mean,
                                 const Eigen::Ref<const Eigen::VectorXd>& d_var);

/// Maps dF/dSigma (entries treated as independent) onto the scale block.
Eigen::VectorXd pullback_covariance(const GaussianParams& params,
                                    const Eigen::Ref<const Eigen::MatrixXd>& d_cov);

/// Pulls dF/dp (multinomial probabilities) back to log(rates).
Eigen::VectorXd pullback_probabilities(const ExactlyK& ek,
                                       const Eigen::Ref<const Eigen::VectorXd>& d_prob);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

McEstimate mc_expected_loss(const ConditionedGaussian& cg,
                            const Eigen::Ref<const Eigen::VectorXd>& y, LossKind kind, Rng& rng,
                            Eigen::Index count);
McEstimate mc_expected_loss(const ExactlyK& ek, const Eigen::Ref<const CountVector>& y,
                            LossKind kind, Rng& rng, Eigen::Index count);

}  // namespace eqcon
