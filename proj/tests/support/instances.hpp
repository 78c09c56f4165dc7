#pragma once

#include <random>

#include <Eigen/Dense>

#include "eqcon/constraint.hpp"
#include "eqcon/gauss.hpp"
#include "eqcon/random.hpp"

namespace testing_support {

inline Eigen::VectorXd normal_vector(eqcon::Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Eigen::MatrixXd normal_matrix(eqcon::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = normal_vector(rng, cols).transpose();
  return m;
}

inline Eigen::MatrixXd random_spd(eqcon::Rng& rng, Eigen::Index n) {
  const Eigen::MatrixXd b = normal_matrix(rng, n, n);
  return b * b.transpose() / static_cast<double>(n) + 0.3 * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_variances(eqcon::Rng& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

// Gaussian instance with a feasible target y (A y = k).
struct Instance {
  eqcon::GaussianParams params;
  eqcon::ConstraintSystem cs;
  Eigen::VectorXd y;
};

inline Instance random_instance(eqcon::Rng& rng, Eigen::Index n, Eigen::Index a, bool full) {
  const Eigen::VectorXd mean = normal_vector(rng, n);
  eqcon::GaussianParams params = full ? eqcon::GaussianParams::full(mean, random_spd(rng, n))
                                      : eqcon::GaussianParams::diagonal(mean, random_variances(rng, n));
  const Eigen::MatrixXd am = normal_matrix(rng, a, n);
  const Eigen::VectorXd y = normal_vector(rng, n);
  return {std::move(params), eqcon::ConstraintSystem(am, am * y), y};
}

}  // namespace testing_support
