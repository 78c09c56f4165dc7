#include <benchmark/benchmark.h>

#include <random>

#include "eqcon/bench.hpp"
#include "eqcon/discrete.hpp"
#include "eqcon/estim.hpp"
#include "eqcon/gauss.hpp"
#include "eqcon/loss.hpp"
#include "eqcon/train.hpp"

using namespace eqcon;

namespace {

GaussianProblem problem(Eigen::Index n, Eigen::Index a) {
  Rng rng(17);
  return make_gaussian_problem(n, a, rng);
}

void BM_Condition(benchmark::State& state) {
  const GaussianProblem p = problem(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(condition(p.params, p.constraint));
}
BENCHMARK(BM_Condition)->Args({10, 2})->Args({50, 5})->Args({200, 20});

void BM_SampleGaussian(benchmark::State& state) {
  const GaussianProblem p = problem(state.range(0), 2);
  const ConditionedGaussian cg = condition(p.params, p.constraint);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(cg.sample(rng, 1000));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_SampleGaussian)->Arg(10)->Arg(100);

void BM_LossAndGradient(benchmark::State& state) {
  const GaussianProblem p = problem(state.range(0), 2);
  const auto kind = static_cast<LossKind>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(expected_loss_gaussian(condition(p.params, p.constraint), p.target, kind));
    benchmark::DoNotOptimize(grad_expected_loss_gaussian(p.params, p.constraint, p.target, kind));
  }
}
BENCHMARK(BM_LossAndGradient)->Args({10, 0})->Args({10, 1})->Args({50, 0});

void BM_Estimator(benchmark::State& state) {
  const GaussianProblem p = problem(10, 2);
  const GaussianGradientEstimator est(p.params, p.constraint, p.target, LossKind::L1);
  const EstimatorKind kind = kAllEstimators[static_cast<std::size_t>(state.range(0))];
  state.SetLabel(std::string(to_string(kind)));
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(est.estimate(kind, rng, 1));
}
BENCHMARK(BM_Estimator)->DenseRange(0, 5);

void BM_ProjectL1(benchmark::State& state) {
  const GaussianProblem p = problem(state.range(0), state.range(1));
  Rng rng(3);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(p.params.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(project_l1(p.constraint, z));
}
BENCHMARK(BM_ProjectL1)->Args({10, 1})->Args({10, 3})->Args({30, 6});

void BM_MultinomialSample(benchmark::State& state) {
  const ExactlyK law(Eigen::VectorXd::LinSpaced(state.range(0), 0.5, 5.0), 1000);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(law.sample(rng, 100));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_MultinomialSample)->Arg(10)->Arg(100);

void BM_PoissonL1(benchmark::State& state) {
  Rng rng(5);
  const PoissonProblem p = make_poisson_problem(state.range(0), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(expected_loss_poisson(p.law, p.target, LossKind::L1));
    benchmark::DoNotOptimize(grad_expected_loss_poisson(p.law, p.target, LossKind::L1));
  }
}
BENCHMARK(BM_PoissonL1)->Arg(10)->Arg(100);

void BM_EncoderStep(benchmark::State& state) {
  const Mlp net(EncoderSpec{});
  const Eigen::Vector3d x(1.0, 1.5, 1.2);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.n_params());
  Mlp::Tape tape;
  for (auto _ : state) {
    const Eigen::VectorXd out = net.forward(x, tape);
    net.backward(tape, out, grad);
  }
}
BENCHMARK(BM_EncoderStep);

}  // namespace

BENCHMARK_MAIN();
