#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eqcon/error.hpp"
#include "eqcon/loss.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace eqcon;
using testing_support::random_instance;

namespace {

const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

ConditionedGaussian sum_to_zero() {
  return condition(GaussianParams::diagonal(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()),
                   ConstraintSystem(Eigen::MatrixXd{{1.0, 1.0}}, Eigen::VectorXd::Zero(1)));
}

Eigen::VectorXd theta_of(const GaussianParams& p) {
  Eigen::VectorXd t(p.dim() + p.n_scale_params());
  t << p.mean(), p.scale_params();
  return t;
}

}  // namespace

TEST_CASE("loss kinds parse") {
  CHECK(parse_loss_kind("L1") == LossKind::L1);
  CHECK(parse_loss_kind("l2") == LossKind::L2);
  CHECK_THROWS_AS(parse_loss_kind("L3"), Error);
}

TEST_CASE("closed forms at the target") {
  Rng rng(1);
  const auto inst = random_instance(rng, 5, 2, false);
  const ConditionedGaussian cg = condition(inst.params, inst.cs);
  const Eigen::VectorXd y = cg.cond_mean();
  CHECK(expected_loss_gaussian(cg, y, LossKind::L1) ==
        doctest::Approx(kSqrt2OverPi * cg.marg_vars().cwiseSqrt().sum()).epsilon(1e-12));
  CHECK(expected_loss_gaussian(cg, y, LossKind::L2) == doctest::Approx(cg.marg_vars().sum()).epsilon(1e-12));
}

TEST_CASE("symmetric case against Monte Carlo") {
  const ConditionedGaussian cg = sum_to_zero();
  const Eigen::Vector2d y = Eigen::Vector2d::Zero();
  CHECK(expected_loss_gaussian(cg, y, LossKind::L2) == doctest::Approx(1.0).epsilon(1e-14));
  Rng rng(42);
  for (LossKind kind : {LossKind::L1, LossKind::L2}) {
    const McEstimate mc = mc_expected_loss(cg, y, kind, rng, 1000000);
    CHECK(std::abs(mc.estimate - expected_loss_gaussian(cg, y, kind)) <= 3.0 * mc.std_error);
  }
  const McEstimate mc = mc_expected_loss(cg, y, LossKind::L2, rng, 1000000);
  CHECK(std::abs(mc.estimate - 1.0) <= 0.005);
}

TEST_CASE("infeasible targets are rejected") {
  const ConditionedGaussian cg = sum_to_zero();
  CHECK_THROWS_AS(expected_loss_gaussian(cg, Eigen::Vector2d(1.0, 0.0), LossKind::L2), Error);
  const ExactlyK law(Eigen::Vector2d(1.0, 1.0), 2);
  CHECK_THROWS_AS(expected_loss_poisson(law, CountVector{{2, 1}}, LossKind::L1), Error);
}

TEST_CASE("folded normal") {
  CHECK(folded_normal_mean(0.0, 1.0) == doctest::Approx(kSqrt2OverPi).epsilon(1e-15));
  CHECK(folded_normal_mean(-3.0, 0.0) == 3.0);
  CHECK(folded_normal_mean(50.0, 1.0) == doctest::Approx(50.0).epsilon(1e-15));
}

TEST_CASE("L1 lower bound and variance collapse") {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto inst = random_instance(rng, 4, 1, t % 2 == 0);
    const ConditionedGaussian cg = condition(inst.params, inst.cs);
    const double bound = (cg.cond_mean() - inst.y).lpNorm<1>();
    CHECK(expected_loss_gaussian(cg, inst.y, LossKind::L1) > bound);
  }
  // Feasible mean: the conditional mean is unchanged by covariance scaling.
  const Eigen::MatrixXd a{{1.0, 2.0, -1.0}};
  const ConstraintSystem cs(a, Eigen::VectorXd::Constant(1, 1.0));
  const Eigen::Vector3d mean(1.0, 0.5, 1.0);
  const Eigen::Vector3d y(0.0, 1.0, 1.0);
  double previous = -1.0;
  for (double c : {0.05, 0.2, 0.5, 0.8, 1.0}) {
    const GaussianParams p = GaussianParams::diagonal(mean, c * c * Eigen::Vector3d(1.0, 2.0, 0.5));
    const double v = expected_loss_gaussian(condition(p, cs), y, LossKind::L1);
    CHECK(v >= previous);
    previous = v;
  }
}

TEST_CASE("poisson closed forms") {
  const ExactlyK two(Eigen::Vector2d(1.0, 1.0), 2);
  CHECK(expected_loss_poisson(two, CountVector{{1, 1}}, LossKind::L2) == doctest::Approx(1.0).epsilon(1e-14));
  const ExactlyK one(Eigen::Vector2d(1.0, 1.0), 1);
  CHECK(expected_loss_poisson(one, CountVector{{0, 1}}, LossKind::L1) == doctest::Approx(1.0).epsilon(1e-14));
  const ExactlyK skew(Eigen::Vector2d(1.0, 3.0), 4);
  CHECK(expected_loss_poisson(skew, CountVector{{1, 3}}, LossKind::L2) ==
        doctest::Approx(2.0 * 4.0 * 0.25 * 0.75).epsilon(1e-13));
  CHECK(std::abs(expected_loss_poisson(skew, CountVector{{1, 3}}, LossKind::L1) -
                 oracle::enumerated_loss(skew.rates(), CountVector{{1, 3}}, true)) <= 1e-12);
}

TEST_CASE("poisson closed forms match enumeration") {
  Rng rng(21);
  std::uniform_real_distribution<double> rate(0.3, 6.0);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + t % 2;
    const std::int64_t k = 1 + t % 6;
    Eigen::VectorXd rates(n);
    for (Eigen::Index i = 0; i < n; ++i) rates(i) = rate(rng);
    const ExactlyK law(rates, k);
    CountVector y(n);
    ExactlyK(Eigen::VectorXd::Ones(n), k).draw(rng, y);
    for (bool l1 : {true, false}) {
      const double closed = expected_loss_poisson(law, y, l1 ? LossKind::L1 : LossKind::L2);
      CHECK(std::abs(closed - oracle::enumerated_loss(rates, y, l1)) <= 1e-10);
    }
  }
}

TEST_CASE("L2 mean gradient is the projected residual") {
  Rng rng(13);
  const auto inst = random_instance(rng, 5, 2, false);
  const ConditioningMap map(inst.params, inst.cs);
  const ParamGradient g = grad_expected_loss_gaussian(inst.params, inst.cs, inst.y, LossKind::L2);
  const Eigen::VectorXd expected = map.projector.transpose() * (2.0 * (map.cond_mean - inst.y));
  CHECK((g.mean - expected).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("L1 mean gradient vanishes at the target") {
  Rng rng(14);
  const auto inst = random_instance(rng, 4, 1, true);
  const ConditionedGaussian cg = condition(inst.params, inst.cs);
  const ParamGradient g = grad_expected_loss_gaussian(inst.params, inst.cs, cg.cond_mean(), LossKind::L1);
  CHECK(g.mean.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gaussian gradients match finite differences") {
  Rng rng(15);
  for (int t = 0; t < 8; ++t) {
    const bool full = t % 2 == 1;
    const auto inst = random_instance(rng, 4, 1 + t % 2, full);
    for (LossKind kind : {LossKind::L1, LossKind::L2}) {
      const Eigen::VectorXd analytic = grad_expected_loss_gaussian(inst.params, inst.cs, inst.y, kind).flat();
      const Eigen::Index n = inst.params.dim();
      const Eigen::VectorXd fd = oracle::central_diff(
          [&](const Eigen::VectorXd& th) {
            const GaussianParams p = GaussianParams::from_scale_params(th.head(n), th.tail(th.size() - n), !full);
            return expected_loss_gaussian(condition(p, inst.cs), inst.y, kind);
          },
          theta_of(inst.params));
      CHECK(oracle::rel_error(analytic, fd) <= 1e-5);
    }
  }
}

TEST_CASE("poisson gradients match finite differences") {
  Rng rng(16);
  std::uniform_real_distribution<double> rate(0.5, 5.0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index n = 2 + t % 4;
    const std::int64_t k = 1 + 3 * (t % 4);
    Eigen::VectorXd rates(n);
    for (Eigen::Index i = 0; i < n; ++i) rates(i) = rate(rng);
    CountVector y(n);
    ExactlyK(Eigen::VectorXd::Ones(n), k).draw(rng, y);
    for (LossKind kind : {LossKind::L1, LossKind::L2}) {
      const Eigen::VectorXd analytic = grad_expected_loss_poisson(ExactlyK(rates, k), y, kind);
      const Eigen::VectorXd fd = oracle::central_diff(
          [&](const Eigen::VectorXd& log_rates) {
            return expected_loss_poisson(ExactlyK(log_rates.array().exp(), k), y, kind);
          },
          rates.array().log().matrix());
      CHECK(oracle::rel_error(analytic, fd) <= 1e-5);
    }
  }
}

TEST_CASE("monte carlo needs two draws") {
  Rng rng(0);
  CHECK_THROWS_AS(mc_expected_loss(sum_to_zero(), Eigen::Vector2d::Zero(), LossKind::L2, rng, 1), Error);
}
