#include "eqcon/constraint.hpp"

#include <limits>
#include <string>
#include <utility>

#include "eqcon/error.hpp"

namespace eqcon {

Eigen::Index numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.size() == 0) return 0;
  const double max_col_norm = m.colwise().norm().maxCoeff();
  if (max_col_norm == 0.0) return 0;
  const double tau = static_cast<double>(m.cols()) *
                     std::numeric_limits<double>::epsilon() * max_col_norm;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const auto& r = qr.matrixR();
  const Eigen::Index diag = std::min(m.rows(), m.cols());
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < diag; ++i) {
    if (std::abs(r(i, i)) > tau) ++rank;
  }
  return rank;
}

ConstraintSystem::ConstraintSystem(Eigen::MatrixXd matrix_a, Eigen::VectorXd vector_k)
    : a_(std::move(matrix_a)), k_(std::move(vector_k)) {
  if (a_.rows() < 1 || a_.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "constraint matrix must be non-empty");
  }
  if (k_.size() != a_.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "k has length " + std::to_string(k_.size()) + " but A has " +
                    std::to_string(a_.rows()) + " rows");
  }
  if (!a_.allFinite() || !k_.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "constraint contains NaN or Inf");
  }
  if (a_.rows() > a_.cols()) {
    throw Error(ErrorCode::RankDeficient, "more constraint rows than variables");
  }
  rank_ = numerical_rank(a_);
  if (rank_ < a_.rows()) {
    throw Error(ErrorCode::RankDeficient,
                "constraint matrix has rank " + std::to_string(rank_) + " < " +
                    std::to_string(a_.rows()) + " rows");
  }
}

ConstraintSystem::ConstraintSystem(Trusted, Eigen::MatrixXd matrix_a,
                                   Eigen::VectorXd vector_k, Eigen::Index rank)
    : a_(std::move(matrix_a)), k_(std::move(vector_k)), rank_(rank) {}

ConstraintSystem ConstraintSystem::with_rhs(Eigen::VectorXd vector_k) const {
  if (vector_k.size() != a_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side length mismatch");
  }
  if (!vector_k.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "right-hand side contains NaN or Inf");
  }
  return ConstraintSystem(Trusted{}, a_, std::move(vector_k), rank_);
}

Eigen::VectorXd ConstraintSystem::residual(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != n_vars()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has length " + std::to_string(z.size()) + ", expected " +
                    std::to_string(n_vars()));
  }
  return a_ * z - k_;
}

bool ConstraintSystem::is_satisfied(const Eigen::Ref<const Eigen::VectorXd>& z,
                                    double tol) const {
  const Eigen::VectorXd r = residual(z);
  return r.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace eqcon
