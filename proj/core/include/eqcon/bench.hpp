#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqcon/discrete.hpp"
#include "eqcon/estim.hpp"
#include "eqcon/gauss.hpp"
#include "eqcon/loss.hpp"

namespace eqcon {

enum class Family { Gaussian, Poisson };

std::string_view to_string(Family family) noexcept;
Family parse_family(std::string_view text);

/// Synthetic estimator comparison. Field names double as the JSON config keys.
struct BenchConfig {
  Eigen::Index n_vars = 10;
  Eigen::Index n_constraints = 2;
  Eigen::Index n_param_sets = 20;
  Eigen::Index n_grad_samples = 10000;
  LossKind loss_kind = LossKind::L2;
  Family family = Family::Gaussian;
  std::uint64_t seed = 0;

  /// Throws ConfigError. The Poisson family carries exactly one (sum) row.
  void validate() const;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
};

struct EstimatorReport {
  EstimatorKind kind = EstimatorKind::Random;
  MetricSummary bias;
  MetricSummary variance;
  MetricSummary avg_error;
};

/// Metrics of one parameter set.
struct SetMetrics {
  double bias = 0.0;
  double variance = 0.0;
  double avg_error = 0.0;
};

/// 1 - u.v / (|u| |v|). Throws ZeroVector when either norm is zero.
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& v);

/// bias      = d(mean_j h_j, h_gt)
/// variance  = population variance of { d(h_i, mean_j h_j) }
/// avg_error = mean_i d(h_i, h_gt)
/// with d the cosine distance. An all-zero estimate carries no direction and
/// is scored as orthogonal (distance 1).
SetMetrics compute_metrics(const Eigen::Ref<const Eigen::VectorXd>& ground_truth,
                           const std::vector<Eigen::VectorXd>& estimates);

/// One random Gaussian benchmark problem.
struct GaussianProblem {
  GaussianParams params;
  ConstraintSystem constraint;
  Eigen::VectorXd target;
};

/// mean ~ N(0, I), sigma log-uniform on [0.1, 2], A ~ N(0, 1) entries redrawn
/// until full rank and well conditioned, target ~ N(0, I) and k = A target.
GaussianProblem make_gaussian_problem(Eigen::Index n_vars, Eigen::Index n_constraints, Rng& rng);

/// One random exactly-k problem.
struct PoissonProblem {
  ExactlyK law;
  CountVector target;
};

/// Rates log-uniform on [0.5, 5]; target counts drawn from independent
/// Poissons with their own log-uniform rates, redrawn until the total is
/// positive; k = sum(target).
PoissonProblem make_poisson_problem(Eigen::Index n_vars, Rng& rng);

/// Runs every applicable estimator on `n_param_sets` problems. Parameter sets
/// run in parallel on up to `threads` workers; each owns a seed derived from
/// (seed, set index), so the output does not depend on `threads`.
std::vector<EstimatorReport> run_bench(const BenchConfig& cfg, unsigned threads = 1);

/// CSV with header family,loss,estimator,metric,mean,std.
std::string bench_report_csv(const BenchConfig& cfg, const std::vector<EstimatorReport>& reports);
/// JSON mirror of the CSV plus the configuration (including the seed).
std::string bench_report_json(const BenchConfig& cfg, const std::vector<EstimatorReport>& reports);

const EstimatorReport& find_report(const std::vector<EstimatorReport>& reports, EstimatorKind kind);

}  // namespace eqcon
