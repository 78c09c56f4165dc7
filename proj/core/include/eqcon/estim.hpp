#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqcon/constraint.hpp"
#include "eqcon/discrete.hpp"
#include "eqcon/gauss.hpp"
#include "eqcon/loss.hpp"
#include "eqcon/random.hpp"

namespace eqcon {

/// Gradient estimators, baselines first. The order is the reporting order.
enum class EstimatorKind {
  Random,
  UnconstrainedMarginal,
  ConstrainedLayer,
  ConstrainedReparam,
  ConstrainedMarginal,
  MarginalExpectation,
};

inline constexpr std::array<EstimatorKind, 6> kAllEstimators = {
    EstimatorKind::Random,             EstimatorKind::UnconstrainedMarginal,
    EstimatorKind::ConstrainedLayer,   EstimatorKind::ConstrainedReparam,
    EstimatorKind::ConstrainedMarginal, EstimatorKind::MarginalExpectation,
};

/// Estimators that have a meaning for the exactly-k Poisson family.
inline constexpr std::array<EstimatorKind, 4> kPoissonEstimators = {
    EstimatorKind::Random,
    EstimatorKind::UnconstrainedMarginal,
    EstimatorKind::ConstrainedMarginal,
    EstimatorKind::MarginalExpectation,
};

std::string_view to_string(EstimatorKind kind) noexcept;
/// Accepts the enumerator names, e.g. "MarginalExpectation". Throws ConfigError.
EstimatorKind parse_estimator_kind(std::string_view text);

struct GradEstimate {
  Eigen::VectorXd grad_mean;
  Eigen::VectorXd grad_scale;
  Eigen::Index samples_used = 0;

  Eigen::VectorXd flat() const;
};

/// Weighted least-squares repair of z_hat onto A z = k:
///   z = z_hat + W A^T (A W A^T)^-1 (k - A z_hat).
/// W defaults to the identity (plain Euclidean projection).
Eigen::VectorXd project_l2(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat);
Eigen::VectorXd project_l2(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat,
                           const Eigen::Ref<const Eigen::MatrixXd>& weight);

/// Result of the L1-minimal repair. `active` lists the coordinates that
/// absorb the residual (one per constraint row, ascending); every other
/// coordinate is left untouched.
struct L1Projection {
  Eigen::VectorXd point;
  std::vector<Eigen::Index> active;
};

/// argmin ||z - z_hat||_1 subject to A z = k. Single-row systems move the
/// lowest-index coordinate with the largest |a_j|; multi-row systems solve the
/// split-variable linear program with Bland's rule. Throws LpFailure.
L1Projection project_l1_detailed(const ConstraintSystem& cs,
                                 const Eigen::Ref<const Eigen::VectorXd>& z_hat);
Eigen::VectorXd project_l1(const ConstraintSystem& cs,
                           const Eigen::Ref<const Eigen::VectorXd>& z_hat);

/// Jacobian-transpose product of the realized L1 branch:
/// returns (I - E_B A_B^-1 A)^T g for the active set B.
Eigen::VectorXd l1_branch_vjp(const ConstraintSystem& cs, const std::vector<Eigen::Index>& active,
                              const Eigen::Ref<const Eigen::VectorXd>& g);

/// Precomputes the conditioning of one (params, constraint, target) triple and
/// evaluates any estimator against it. Immutable; `estimate` only touches the
/// caller's random stream.
class GaussianGradientEstimator {
 public:
  GaussianGradientEstimator(GaussianParams params, ConstraintSystem cs, Eigen::VectorXd target,
                            LossKind loss);

  /// Average of `n_samples` single-draw estimates.
  GradEstimate estimate(EstimatorKind kind, Rng& rng, Eigen::Index n_samples) const;

  /// Exact analytic gradient of the closed-form expected loss.
  ParamGradient ground_truth() const;

  /// Constraint-satisfying sample used by the forward pass of `kind`
  /// (exact sample, reparameterized correction, or L1 repair).
  Eigen::VectorXd forward_sample(EstimatorKind kind, Rng& rng) const;

  const GaussianParams& params() const noexcept { return params_; }
  const ConditionedGaussian& conditioned() const noexcept { return cg_; }

 private:
  void accumulate(EstimatorKind kind, Rng& rng, Eigen::VectorXd& mean_acc,
                  Eigen::VectorXd& scale_acc) const;
  Eigen::VectorXd reparam_noise(Rng& rng) const;
  Eigen::VectorXd reparam_scale_grad(const Eigen::VectorXd& g_hat, const Eigen::VectorXd& eps) const;

  GaussianParams params_;
  ConstraintSystem cs_;
  Eigen::VectorXd target_;
  LossKind loss_;
  ConditionedGaussian cg_;
  ConditioningMap map_;
};

GradEstimate estimate_grad(EstimatorKind kind, const GaussianParams& params,
                           const ConstraintSystem& cs, const Eigen::Ref<const Eigen::VectorXd>& y,
                           LossKind loss_kind, Rng& rng, Eigen::Index n_samples);

/// Exactly-k Poisson counterpart; gradients are with respect to log(rates)
/// and land in `grad_scale` (grad_mean is empty).
class PoissonGradientEstimator {
 public:
  PoissonGradientEstimator(ExactlyK law, CountVector target, LossKind loss);

  /// Throws InvalidArgument for estimators outside `kPoissonEstimators`.
  GradEstimate estimate(EstimatorKind kind, Rng& rng, Eigen::Index n_samples) const;

  Eigen::VectorXd ground_truth() const;

 private:
  ExactlyK law_;
  CountVector target_;
  LossKind loss_;
};

}  // namespace eqcon
