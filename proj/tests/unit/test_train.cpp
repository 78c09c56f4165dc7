#include <doctest.h>

#include <cmath>

#include "eqcon/error.hpp"
#include "eqcon/train.hpp"

using namespace eqcon;

namespace {

EncoderSpec tiny_spec(std::uint64_t seed = 3) {
  EncoderSpec spec;
  spec.layer_widths = {3, 4, 6};
  spec.init_seed = seed;
  return spec;
}

TrainConfig quick_config(TrainMethod method) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.n_samples = 100;
  cfg.epochs = 5;
  return cfg;
}

}  // namespace

TEST_CASE("cstr targets are feasible") {
  const RegressionTask clean = make_cstr_task(50, 10, 10, 0.0, 1);
  const RegressionTask noisy = make_cstr_task(50, 10, 10, 0.1, 1);
  for (const RegressionTask* task : {&clean, &noisy}) {
    for (const Dataset* d : {&task->train, &task->val, &task->test}) {
      for (Eigen::Index r = 0; r < d->size(); ++r) {
        const Eigen::VectorXd y = d->targets.row(r).transpose();
        const Eigen::VectorXd x = d->inputs.row(r).transpose();
        CHECK((task->matrix_a * y - d->rhs.row(r).transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK(std::abs(y(0) + y(1) - x(1)) <= 1e-12);
      }
    }
  }
  CHECK(clean.train.targets != noisy.train.targets);
}

TEST_CASE("cstr task is reproducible") {
  const RegressionTask a = make_cstr_task(20, 5, 5, 0.05, 11);
  const RegressionTask b = make_cstr_task(20, 5, 5, 0.05, 11);
  CHECK(a.train.targets == b.train.targets);
  CHECK(a.test.inputs == b.test.inputs);
  CHECK_THROWS_AS(make_cstr_task(0, 5, 5, 0.0, 1), Error);
  CHECK_THROWS_AS(make_cstr_task(5, 5, 5, -1.0, 1), Error);
}

TEST_CASE("split is 70/10/20") {
  TrainConfig cfg;
  cfg.n_samples = 500;
  const RegressionTask task = make_task(cfg);
  CHECK(task.train.size() == 350);
  CHECK(task.val.size() == 50);
  CHECK(task.test.size() == 100);
}

TEST_CASE("config and encoder validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.sigma_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  EncoderSpec spec;
  spec.layer_widths = {3, 6};
  CHECK_THROWS_AS(spec.validate(3, 3), Error);
  spec.layer_widths = {3, 8, 5};
  CHECK_THROWS_AS(spec.validate(3, 3), Error);
  CHECK_NOTHROW(tiny_spec().validate(3, 3));
  CHECK(parse_train_method("ProjectL1Baseline") == TrainMethod::ProjectL1Baseline);
  CHECK_THROWS_AS(parse_train_method("Adam"), Error);
  CHECK(parse_activation("relu") == Activation::Relu);
}

TEST_CASE("scale head respects the floor") {
  for (double raw : {-1e6, -50.0, -1.0, 0.0, 3.0, 800.0}) {
    const double s = scale_from_raw(raw, 1e-3);
    CHECK(s >= 1e-3);
    CHECK(std::isfinite(s));
  }
  CHECK(scale_from_raw(-1e6, 1e-3) == 1e-3);
}

TEST_CASE("mlp parameters round trip") {
  const Mlp net(tiny_spec());
  CHECK(net.n_params() == 3 * 4 + 4 + 4 * 6 + 6);
  Mlp copy(tiny_spec(99));
  copy.set_params(net.params());
  const Eigen::Vector3d x(1.0, 1.5, 1.2);
  CHECK(copy.forward(x) == net.forward(x));
}

TEST_CASE("encoder gradients match finite differences") {
  TrainConfig cfg = quick_config(TrainMethod::ClosedFormL2);
  const RegressionTask task = make_task(cfg);
  CHECK(finite_diff_check(tiny_spec(), cfg, task, 3) <= 1e-4);
  cfg.method = TrainMethod::ClosedFormL1;
  CHECK(finite_diff_check(tiny_spec(), cfg, task, 3) <= 1e-4);
  cfg.method = TrainMethod::UnconstrainedBaseline;
  CHECK(finite_diff_check(tiny_spec(), cfg, task, 2) <= 1e-4);
  EncoderSpec relu = tiny_spec();
  relu.activation = Activation::Relu;
  cfg.method = TrainMethod::ClosedFormL2;
  CHECK(finite_diff_check(relu, cfg, task, 2) <= 1e-4);
  cfg.method = TrainMethod::Estimator;
  CHECK_THROWS_AS(finite_diff_check(tiny_spec(), cfg, task, 1), Error);
}

TEST_CASE("tied hidden units receive tied gradients") {
  const TrainConfig cfg = quick_config(TrainMethod::ClosedFormL2);
  const RegressionTask task = make_task(cfg);
  Mlp net(tiny_spec());
  net.set_params(Eigen::VectorXd::Constant(net.n_params(), 0.1));
  Eigen::VectorXd grad(net.n_params());
  objective_and_gradient(net, cfg, task, task.train, grad);
  // Layout: W1 (4x3 row-major), b1 (4), W2 (6x4 row-major), b2 (6).
  for (Eigen::Index h = 1; h < 4; ++h) {
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(grad(3 * h + c) == doctest::Approx(grad(c)).epsilon(1e-12));
    CHECK(grad(12 + h) == doctest::Approx(grad(12)).epsilon(1e-12));
    for (Eigen::Index o = 0; o < 6; ++o) {
      CHECK(grad(16 + 4 * o + h) == doctest::Approx(grad(16 + 4 * o)).epsilon(1e-12));
    }
  }
}

TEST_CASE("closed-form training loss decreases early") {
  for (TrainMethod method : {TrainMethod::ClosedFormL2, TrainMethod::ClosedFormL1}) {
    TrainConfig cfg = quick_config(method);
    cfg.epochs = 10;
    cfg.learning_rate = 0.005;
    const RegressionTask task = make_task(cfg);
    const TrainReport report = train_model(EncoderSpec{}, cfg, task);
    REQUIRE(report.epochs.size() == 10);
    for (std::size_t e = 1; e < report.epochs.size(); ++e) {
      CHECK(report.epochs[e].train_loss < report.epochs[e - 1].train_loss);
    }
  }
}

TEST_CASE("constrained methods never violate") {
  for (TrainMethod method : {TrainMethod::ClosedFormL1, TrainMethod::ClosedFormL2, TrainMethod::Estimator,
                             TrainMethod::ProjectL2Baseline, TrainMethod::ProjectL1Baseline}) {
    const TrainConfig cfg = quick_config(method);
    const TrainReport report = train_model(EncoderSpec{}, cfg, make_task(cfg));
    for (const EpochRecord& rec : report.epochs) CHECK(rec.test_violation_rate == 0.0);
    CHECK(report.violation_rate == 0.0);
  }
  const TrainConfig cfg = quick_config(TrainMethod::UnconstrainedBaseline);
  CHECK(train_model(EncoderSpec{}, cfg, make_task(cfg)).violation_rate >= 0.99);
}

TEST_CASE("training is deterministic") {
  const TrainConfig cfg = quick_config(TrainMethod::Estimator);
  const RegressionTask task = make_task(cfg);
  const std::string a = train_report_json(EncoderSpec{}, cfg, train_model(EncoderSpec{}, cfg, task));
  const std::string b = train_report_json(EncoderSpec{}, cfg, train_model(EncoderSpec{}, cfg, task));
  CHECK(a == b);
  CHECK(a.back() == '\n');
  CHECK(a.find("\"seed\"") != std::string::npos);
}

TEST_CASE("divergence is reported") {
  TrainConfig cfg = quick_config(TrainMethod::ClosedFormL2);
  cfg.learning_rate = 1e6;
  CHECK_THROWS_AS(train_model(EncoderSpec{}, cfg, make_task(cfg)), Error);
}

TEST_CASE("marginal expectation training tracks the closed form") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    TrainConfig cf;
    cf.seed = seed;
    TrainConfig me = cf;
    me.method = TrainMethod::Estimator;
    me.estimator = EstimatorKind::MarginalExpectation;
    me.loss = LossKind::L2;
    me.estimator_samples = 16;
    const RegressionTask task = make_task(cf);
    const double cf_mse = train_model(EncoderSpec{}, cf, task).test_mse;
    const double me_mse = train_model(EncoderSpec{}, me, task).test_mse;
    CHECK(me_mse <= 2.0 * cf_mse);
  }
}
