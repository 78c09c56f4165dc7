#pragma once

#include <vector>

#include <Eigen/Dense>

namespace eqcon {

struct LpSolution {
  Eigen::VectorXd x;
  /// Column index of the basic variable for each equality row.
  std::vector<Eigen::Index> basis;
  double objective = 0.0;
  int iterations = 0;
};

/// Dense two-phase primal simplex for
///
///   minimize c^T x  subject to  A x = b,  x >= 0
///
/// with A of full row rank. Pivoting follows Bland's rule, so the result is
/// deterministic and cycling cannot occur. Throws Error{LpFailure} when the
/// problem is infeasible, unbounded, or exceeds `max_iterations`.
LpSolution solve_standard_lp(const Eigen::Ref<const Eigen::MatrixXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             const Eigen::Ref<const Eigen::VectorXd>& c,
                             int max_iterations = 10000);

}  // namespace eqcon
