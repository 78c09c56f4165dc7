#pragma once

#include <Eigen/Dense>

namespace eqcon {

/// Default max-norm tolerance for `ConstraintSystem::is_satisfied`.
inline constexpr double kDefaultFeasibilityTol = 1e-9;

/// Linear equality system A z = k with A of full row rank.
///
/// Rows are stored as given; callers own any scaling. Immutable after
/// construction.
class ConstraintSystem {
 public:
  /// Validates dimensions, finiteness and rank. Rank is measured with a
  /// column-pivoted QR using the threshold n * eps * (largest column norm).
  ///
  /// Throws Error{DimensionMismatch | NonFiniteInput | RankDeficient}.
  ConstraintSystem(Eigen::MatrixXd matrix_a, Eigen::VectorXd vector_k);

  const Eigen::MatrixXd& matrix_a() const noexcept { return a_; }
  const Eigen::VectorXd& vector_k() const noexcept { return k_; }
  Eigen::Index n_vars() const noexcept { return a_.cols(); }
  Eigen::Index n_rows() const noexcept { return a_.rows(); }
  Eigen::Index rank() const noexcept { return rank_; }

  /// A z - k.
  Eigen::VectorXd residual(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  /// max_i |(A z - k)_i| <= tol.
  bool is_satisfied(const Eigen::Ref<const Eigen::VectorXd>& z,
                    double tol = kDefaultFeasibilityTol) const;

  /// Same matrix with a different right-hand side. Skips the rank check.
  ConstraintSystem with_rhs(Eigen::VectorXd vector_k) const;

 private:
  struct Trusted {};
  ConstraintSystem(Trusted, Eigen::MatrixXd matrix_a, Eigen::VectorXd vector_k,
                   Eigen::Index rank);

  Eigen::MatrixXd a_;
  Eigen::VectorXd k_;
  Eigen::Index rank_ = 0;
};

/// Numerical rank of `m` using the pivoted-QR threshold described above.
Eigen::Index numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace eqcon
