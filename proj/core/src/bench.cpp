#include "eqcon/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "eqcon/error.hpp"
#include "eqcon/format.hpp"

namespace eqcon {
namespace {

constexpr int kMaxRedraws = 1000;

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

double directional_distance(const Eigen::VectorXd& h, const Eigen::Ref<const Eigen::VectorXd>& ref) {
  if (h.squaredNorm() == 0.0) return 1.0;
  return cosine_distance(h, ref);
}

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary out;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::vector<EstimatorKind> estimators_for(Family family) {
  if (family == Family::Poisson) return {kPoissonEstimators.begin(), kPoissonEstimators.end()};
  return {kAllEstimators.begin(), kAllEstimators.end()};
}

template <typename Estimate>
std::vector<SetMetrics> evaluate_set(const Eigen::VectorXd& ground_truth,
                                     const std::vector<EstimatorKind>& kinds,
                                     std::uint64_t set_seed, Eigen::Index n_samples,
                                     Estimate&& estimate) {
  std::vector<SetMetrics> out;
  std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(n_samples));
  for (EstimatorKind kind : kinds) {
    Rng rng(derive_seed(set_seed, 1000 + static_cast<std::uint64_t>(kind)));
    for (auto& h : draws) h = estimate(kind, rng);
    out.push_back(compute_metrics(ground_truth, draws));
  }
  return out;
}

std::vector<SetMetrics> run_set(const BenchConfig& cfg, const std::vector<EstimatorKind>& kinds,
                                std::uint64_t set_seed) {
  Rng rng(set_seed);
  if (cfg.family == Family::Gaussian) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      GaussianProblem problem = make_gaussian_problem(cfg.n_vars, cfg.n_constraints, rng);
      const GaussianGradientEstimator est(problem.params, problem.constraint, problem.target,
                                          cfg.loss_kind);
      const Eigen::VectorXd truth = est.ground_truth().flat();
      if (truth.norm() < 1e-12) continue;
      return evaluate_set(truth, kinds, set_seed, cfg.n_grad_samples,
                          [&](EstimatorKind kind, Rng& r) { return est.estimate(kind, r, 1).flat(); });
    }
  } else {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      PoissonProblem problem = make_poisson_problem(cfg.n_vars, rng);
      const PoissonGradientEstimator est(problem.law, problem.target, cfg.loss_kind);
      const Eigen::VectorXd truth = est.ground_truth();
      if (truth.norm() < 1e-12) continue;
      return evaluate_set(truth, kinds, set_seed, cfg.n_grad_samples,
                          [&](EstimatorKind kind, Rng& r) { return est.estimate(kind, r, 1).grad_scale; });
    }
  }
  throw Error(ErrorCode::InvalidArgument, "could not draw a problem with a non-zero gradient");
}

}  // namespace

std::string_view to_string(Family family) noexcept {
  return family == Family::Gaussian ? "Gaussian" : "Poisson";
}

Family parse_family(std::string_view text) {
  if (text == "Gaussian") return Family::Gaussian;
  if (text == "Poisson") return Family::Poisson;
  throw Error(ErrorCode::ConfigError, "unknown family '" + std::string(text) + "'");
}

void BenchConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (n_vars < 1) fail("n_vars must be >= 1");
  if (n_constraints < 1) fail("n_constraints must be >= 1");
  if (n_param_sets < 1) fail("n_param_sets must be >= 1");
  if (n_grad_samples < 1) fail("n_grad_samples must be >= 1");
  if (n_constraints >= n_vars) fail("n_constraints must be < n_vars");
  if (family == Family::Poisson && n_constraints != 1) {
    fail("the Poisson family has a single sum constraint; set n_constraints to 1");
  }
}

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "vector lengths differ");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  const double cos = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return 1.0 - cos;
}

SetMetrics compute_metrics(const Eigen::Ref<const Eigen::VectorXd>& ground_truth,
                           const std::vector<Eigen::VectorXd>& estimates) {
  if (estimates.empty()) throw Error(ErrorCode::InvalidArgument, "no estimates to score");
  const auto count = static_cast<double>(estimates.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ground_truth.size());
  for (const auto& h : estimates) mean += h;
  mean /= count;

  SetMetrics out;
  out.bias = directional_distance(mean, ground_truth);
  std::vector<double> spread;
  spread.reserve(estimates.size());
  const bool mean_is_zero = mean.squaredNorm() == 0.0;
  for (const auto& h : estimates) {
    out.avg_error += directional_distance(h, ground_truth);
    spread.push_back(mean_is_zero ? 1.0 : directional_distance(h, mean));
  }
  out.avg_error /= count;
  double centre = 0.0;
  for (double d : spread) centre += d;
  centre /= count;
  for (double d : spread) out.variance += (d - centre) * (d - centre);
  out.variance /= count;
  return out;
}

GaussianProblem make_gaussian_problem(Eigen::Index n_vars, Eigen::Index n_constraints, Rng& rng) {
  const Eigen::VectorXd mean = normal_vector(rng, n_vars);
  Eigen::VectorXd variances(n_vars);
  for (Eigen::Index i = 0; i < n_vars; ++i) {
    const double sigma = log_uniform(rng, 0.1, 2.0);
    variances(i) = sigma * sigma;
  }
  GaussianParams params = GaussianParams::diagonal(mean, variances);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Eigen::MatrixXd a(n_constraints, n_vars);
    for (Eigen::Index r = 0; r < n_constraints; ++r) a.row(r) = normal_vector(rng, n_vars).transpose();
    const Eigen::VectorXd target = normal_vector(rng, n_vars);
    try {
      ConstraintSystem cs(a, a * target);
      const ConditioningMap check(params, cs);
      return {std::move(params), std::move(cs), target};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RankDeficient && e.code() != ErrorCode::IllConditioned) throw;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "could not draw a full-rank constraint");
}

PoissonProblem make_poisson_problem(Eigen::Index n_vars, Rng& rng) {
  Eigen::VectorXd rates(n_vars);
  for (Eigen::Index i = 0; i < n_vars; ++i) rates(i) = log_uniform(rng, 0.5, 5.0);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    CountVector target(n_vars);
    for (Eigen::Index i = 0; i < n_vars; ++i) {
      std::poisson_distribution<std::int64_t> pois(log_uniform(rng, 0.5, 5.0));
      target(i) = pois(rng);
    }
    if (target.sum() > 0) return {ExactlyK(rates, target.sum()), target};
  }
  throw Error(ErrorCode::InvalidArgument, "could not draw a positive total");
}

std::vector<EstimatorReport> run_bench(const BenchConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::vector<EstimatorKind> kinds = estimators_for(cfg.family);
  const auto n_sets = static_cast<std::size_t>(cfg.n_param_sets);
  std::vector<std::vector<SetMetrics>> per_set(n_sets);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t s = next++; s < n_sets; s = next++) {
      try {
        per_set[s] = run_set(cfg, kinds, derive_seed(cfg.seed, s));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n_sets)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<EstimatorReport> out;
  for (std::size_t e = 0; e < kinds.size(); ++e) {
    std::vector<double> bias, variance, avg_error;
    for (const auto& set : per_set) {
      bias.push_back(set[e].bias);
      variance.push_back(set[e].variance);
      avg_error.push_back(set[e].avg_error);
    }
    out.push_back({kinds[e], summarize(bias), summarize(variance), summarize(avg_error)});
  }
  return out;
}

const EstimatorReport& find_report(const std::vector<EstimatorReport>& reports, EstimatorKind kind) {
  for (const auto& r : reports) {
    if (r.kind == kind) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "no report for " + std::string(to_string(kind)));
}

std::string bench_report_csv(const BenchConfig& cfg, const std::vector<EstimatorReport>& reports) {
  std::ostringstream out;
  out << "family,loss,estimator,metric,mean,std\n";
  for (const auto& r : reports) {
    const std::pair<const char*, const MetricSummary*> rows[] = {
        {"bias", &r.bias}, {"variance", &r.variance}, {"avg_error", &r.avg_error}};
    for (const auto& [name, m] : rows) {
      out << to_string(cfg.family) << ',' << to_string(cfg.loss_kind) << ',' << to_string(r.kind)
          << ',' << name << ',' << format_double(m->mean) << ',' << format_double(m->std) << '\n';
    }
  }
  return out.str();
}

std::string bench_report_json(const BenchConfig& cfg, const std::vector<EstimatorReport>& reports) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["config"] = {
      {"n_vars", cfg.n_vars},
      {"n_constraints", cfg.n_constraints},
      {"n_param_sets", cfg.n_param_sets},
      {"n_grad_samples", cfg.n_grad_samples},
      {"loss_kind", std::string(to_string(cfg.loss_kind))},
      {"family", std::string(to_string(cfg.family))},
      {"seed", cfg.seed},
  };
  ordered_json rows = ordered_json::array();
  for (const auto& r : reports) {
    auto summary = [](const MetricSummary& m) { return ordered_json{{"mean", m.mean}, {"std", m.std}}; };
    rows.push_back({{"estimator", std::string(to_string(r.kind))},
                    {"bias", summary(r.bias)},
                    {"variance", summary(r.variance)},
                    {"avg_error", summary(r.avg_error)}});
  }
  doc["reports"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace eqcon
