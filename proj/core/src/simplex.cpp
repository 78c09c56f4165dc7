#include "eqcon/simplex.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eqcon/error.hpp"

namespace eqcon {
namespace {

class Tableau {
 public:
  Tableau(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b)
      : rows_(a.rows()), vars_(a.cols()), t_(Eigen::MatrixXd::Zero(a.rows() + 1, a.cols() + a.rows() + 1)),
        basis_(static_cast<std::size_t>(a.rows())) {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double sign = b(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(vars_) = sign * a.row(i);
      t_(i, vars_ + i) = 1.0;
      t_(i, rhs()) = sign * b(i);
      basis_[static_cast<std::size_t>(i)] = vars_ + i;
    }
    const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    tol_ = 1e-11 * scale;
  }

  Eigen::Index rhs() const { return vars_ + rows_; }
  Eigen::Index objective_row() const { return rows_; }

  // Reduced costs for cost vector `c` over the first `active` columns.
  void price(const Eigen::Ref<const Eigen::VectorXd>& c) {
    auto obj = t_.row(objective_row());
    obj.setZero();
    obj.head(c.size()) = c.transpose();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = basis_cost(c, basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) obj -= cb * t_.row(i);
    }
  }

  // Runs Bland-rule pivots over columns [0, active). Returns false when the
  // problem is unbounded.
  bool optimize(Eigen::Index active, int& iterations, int max_iterations) {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < active; ++j) {
        if (t_(objective_row(), j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double pivot = t_(i, enter);
        if (pivot <= tol_) continue;
        const double ratio = t_(i, rhs()) / pivot;
        if (ratio < best - tol_ ||
            (std::abs(ratio - best) <= tol_ && basis_[static_cast<std::size_t>(i)] <
                                                    basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot_on(leave, enter);
      if (++iterations > max_iterations) {
        throw Error(ErrorCode::LpFailure,
                    "simplex exceeded " + std::to_string(max_iterations) + " iterations");
      }
    }
  }

  // Replaces artificial basics that sit at zero level after phase one.
  void evict_artificials() {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < vars_) continue;
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < vars_; ++j) {
        if (std::abs(t_(i, j)) > tol_) {
          col = j;
          break;
        }
      }
      if (col < 0) throw Error(ErrorCode::LpFailure, "equality rows are linearly dependent");
      pivot_on(i, col);
    }
  }

  double objective() const { return -t_(objective_row(), rhs()); }
  double tol() const { return tol_; }

  LpSolution extract() const {
    LpSolution out;
    out.x = Eigen::VectorXd::Zero(vars_);
    out.basis = basis_;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      out.x(basis_[static_cast<std::size_t>(i)]) = std::max(t_(i, rhs()), 0.0);
    }
    return out;
  }

 private:
  double basis_cost(const Eigen::Ref<const Eigen::VectorXd>& c, Eigen::Index col) const {
    return col < c.size() ? c(col) : 0.0;
  }

  void pivot_on(Eigen::Index r, Eigen::Index col) {
    t_.row(r) /= t_(r, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = col;
  }

  Eigen::Index rows_;
  Eigen::Index vars_;
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
  double tol_ = 0.0;
};

}  // namespace

LpSolution solve_standard_lp(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             const Eigen::Ref<const Eigen::VectorXd>& c, int max_iterations) {
  if (b.size() != a.rows() || c.size() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "LP dimensions are inconsistent");
  }
  const Eigen::Index vars = a.cols();
  const Eigen::Index rows = a.rows();
  Tableau tab(a, b);
  int iterations = 0;

  // Phase one: minimize the sum of artificials.
  Eigen::VectorXd phase_one = Eigen::VectorXd::Zero(vars + rows);
  phase_one.tail(rows).setOnes();
  tab.price(phase_one);
  if (!tab.optimize(vars + rows, iterations, max_iterations)) {
    throw Error(ErrorCode::LpFailure, "phase one reported an unbounded direction");
  }
  if (tab.objective() > tab.tol() * static_cast<double>(rows)) {
    throw Error(ErrorCode::LpFailure, "linear program is infeasible");
  }
  tab.evict_artificials();

  tab.price(c);
  if (!tab.optimize(vars, iterations, max_iterations)) {
    throw Error(ErrorCode::LpFailure, "linear program is unbounded");
  }
  LpSolution out = tab.extract();
  out.objective = c.dot(out.x);
  out.iterations = iterations;
  return out;
}

}  // namespace eqcon
