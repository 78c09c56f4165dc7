#include <doctest.h>

#include <cmath>

#include "eqcon/bench.hpp"
#include "eqcon/error.hpp"
#include "support/instances.hpp"

using namespace eqcon;

TEST_CASE("cosine distance examples") {
  const Eigen::Vector3d u(1.0, 2.0, 3.0);
  CHECK(cosine_distance(u, u) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(-1.0, 0.0)) == 2.0);
  CHECK(cosine_distance(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)) == 1.0);
  CHECK_THROWS_AS(cosine_distance(Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 0.0)), Error);
}

TEST_CASE("perfect estimator scores zero") {
  const Eigen::VectorXd truth = Eigen::Vector4d(0.3, -1.0, 2.0, 0.5);
  const std::vector<Eigen::VectorXd> estimates(50, truth);
  const SetMetrics m = compute_metrics(truth, estimates);
  CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(m.variance == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(m.avg_error == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("zero estimates count as orthogonal") {
  const Eigen::VectorXd truth = Eigen::Vector2d(1.0, 0.0);
  const std::vector<Eigen::VectorXd> estimates{Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 0.0)};
  CHECK(compute_metrics(truth, estimates).avg_error == doctest::Approx(0.5));
}

TEST_CASE("random directions are near orthogonal") {
  // Reference: E[d] = 1 and Var[d] = 1/n for independent isotropic u, v.
  Rng rng(8);
  const Eigen::Index n = 10;
  const int count = 20000;
  const Eigen::VectorXd truth = testing_support::normal_vector(rng, n);
  std::vector<Eigen::VectorXd> estimates;
  for (int i = 0; i < count; ++i) estimates.push_back(testing_support::normal_vector(rng, n));
  const SetMetrics m = compute_metrics(truth, estimates);
  const double se = std::sqrt(1.0 / static_cast<double>(n) / count);
  CHECK(std::abs(m.avg_error - 1.0) <= 3.0 * se);
}

TEST_CASE("problem generators") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const GaussianProblem g = make_gaussian_problem(6, 2, rng);
    CHECK(g.constraint.is_satisfied(g.target));
    const Eigen::VectorXd s = g.params.variances().cwiseSqrt();
    CHECK(s.minCoeff() >= 0.1);
    CHECK(s.maxCoeff() <= 2.0);
    const PoissonProblem p = make_poisson_problem(6, rng);
    CHECK(p.target.sum() == p.law.total());
    CHECK(p.law.total() > 0);
    CHECK(p.law.rates().minCoeff() >= 0.5);
    CHECK(p.law.rates().maxCoeff() <= 5.0);
  }
}

TEST_CASE("config validation") {
  BenchConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_constraints = cfg.n_vars;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = BenchConfig{};
  cfg.n_grad_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = BenchConfig{};
  cfg.family = Family::Poisson;
  cfg.n_constraints = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("small bench: sanity and thread independence") {
  for (Family family : {Family::Gaussian, Family::Poisson}) {
    BenchConfig cfg;
    cfg.n_vars = 6;
    cfg.n_constraints = family == Family::Gaussian ? 2 : 1;
    cfg.n_param_sets = 5;
    cfg.n_grad_samples = 300;
    cfg.family = family;
    cfg.loss_kind = LossKind::L1;
    cfg.seed = 4;
    const auto one = run_bench(cfg, 1);
    const auto three = run_bench(cfg, 3);
    CHECK(one.size() == (family == Family::Gaussian ? kAllEstimators.size() : kPoissonEstimators.size()));
    CHECK(bench_report_csv(cfg, one) == bench_report_csv(cfg, three));
    CHECK(bench_report_json(cfg, one) == bench_report_json(cfg, three));
    for (const auto& r : one) {
      CHECK(r.bias.mean >= 0.0);
      CHECK(r.bias.mean <= 2.0);
      CHECK(r.avg_error.mean >= 0.0);
      CHECK(r.avg_error.mean <= 2.0);
      CHECK(r.variance.mean >= 0.0);
    }
    const std::string csv = bench_report_csv(cfg, one);
    CHECK(csv.rfind("family,loss,estimator,metric,mean,std\n", 0) == 0);
    CHECK(csv.back() == '\n');
    CHECK(bench_report_json(cfg, one).back() == '\n');
    CHECK(bench_report_json(cfg, one).find("\"seed\"") != std::string::npos);
  }
}
