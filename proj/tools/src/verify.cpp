#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "eqcon/discrete.hpp"
#include "eqcon/loss.hpp"
#include "eqcon/random.hpp"

namespace eqcon::cli {
namespace {

constexpr double kMcSigmas = 3.0;

struct GaussianCase {
  GaussianParams params;
  ConstraintSystem cs;
  Eigen::VectorXd y;
};

Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

GaussianCase gaussian_case(Rng& rng, bool full) {
  std::uniform_int_distribution<Eigen::Index> dim(2, 6);
  const Eigen::Index n = dim(rng);
  const Eigen::Index a = std::uniform_int_distribution<Eigen::Index>(1, std::min<Eigen::Index>(2, n - 1))(rng);
  const Eigen::VectorXd mean = normal_vector(rng, n);
  std::uniform_real_distribution<double> var(0.2, 2.0);
  Eigen::MatrixXd a_mat(a, n);
  for (Eigen::Index r = 0; r < a; ++r) a_mat.row(r) = normal_vector(rng, n).transpose();
  const Eigen::VectorXd y = normal_vector(rng, n);
  ConstraintSystem cs(a_mat, a_mat * y);
  if (full) {
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index c = 0; c < n; ++c) b.col(c) = normal_vector(rng, n);
    const Eigen::MatrixXd cov = 0.5 * b * b.transpose() / static_cast<double>(n) +
                                0.5 * Eigen::MatrixXd::Identity(n, n);
    return {GaussianParams::full(mean, cov), std::move(cs), y};
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = var(rng);
  return {GaussianParams::diagonal(mean, v), std::move(cs), y};
}

struct PoissonCase {
  ExactlyK law;
  CountVector y;
};

PoissonCase poisson_case(Rng& rng) {
  const Eigen::Index n = std::uniform_int_distribution<Eigen::Index>(2, 3)(rng);
  const std::int64_t k = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
  std::uniform_real_distribution<double> log_rate(std::log(0.5), std::log(5.0));
  Eigen::VectorXd rates(n);
  Eigen::VectorXd other(n);
  for (Eigen::Index i = 0; i < n; ++i) rates(i) = std::exp(log_rate(rng));
  for (Eigen::Index i = 0; i < n; ++i) other(i) = std::exp(log_rate(rng));
  CountVector y(n);
  ExactlyK(other, k).draw(rng, y);
  return {ExactlyK(rates, k), y};
}

// Calls `visit` on every non-negative integer vector of length n summing to k.
void for_each_composition(Eigen::Index n, std::int64_t k, const std::function<void(const CountVector&)>& visit) {
  CountVector z = CountVector::Zero(n);
  std::function<void(Eigen::Index, std::int64_t)> rec = [&](Eigen::Index i, std::int64_t left) {
    if (i == n - 1) {
      z(i) = left;
      visit(z);
      return;
    }
    for (std::int64_t v = 0; v <= left; ++v) {
      z(i) = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, k);
}

double enumerated_loss(const ExactlyK& law, const CountVector& y, LossKind kind) {
  double total = 0.0;
  for_each_composition(law.dim(), law.total(), [&](const CountVector& z) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const auto d = static_cast<double>(z(i) - y(i));
      loss += kind == LossKind::L1 ? std::abs(d) : d * d;
    }
    total += law.constrained_pmf(z) * loss;
  });
  return total;
}

// Total variation between the multinomial pmf and the normalized product of
// independent Poisson pmfs restricted to the simplex.
double restriction_tv(const ExactlyK& law) {
  std::vector<double> product;
  std::vector<double> multinomial;
  for_each_composition(law.dim(), law.total(), [&](const CountVector& z) {
    double w = 1.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) w *= poisson_pmf(z(i), law.rates()(i));
    product.push_back(w);
    multinomial.push_back(law.constrained_pmf(z));
  });
  double norm = 0.0;
  for (double w : product) norm += w;
  double tv = 0.0;
  for (std::size_t j = 0; j < product.size(); ++j) tv += std::abs(product[j] / norm - multinomial[j]);
  return 0.5 * tv;
}

double gradient_fd_error(const GaussianCase& c, LossKind kind) {
  const ParamGradient g = grad_expected_loss_gaussian(c.params, c.cs, c.y, kind);
  const Eigen::VectorXd analytic = g.flat();
  const Eigen::Index n = c.params.dim();
  Eigen::VectorXd theta(analytic.size());
  theta << c.params.mean(), c.params.scale_params();
  auto objective = [&](const Eigen::VectorXd& t) {
    const GaussianParams p =
        GaussianParams::from_scale_params(t.head(n), t.tail(t.size() - n), c.params.is_diagonal());
    return expected_loss_gaussian(condition(p, c.cs), c.y, kind);
  };
  Eigen::VectorXd numeric(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(theta(j)));
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(j) += h;
    down(j) -= h;
    numeric(j) = (objective(up) - objective(down)) / (2.0 * h);
  }
  return (analytic - numeric).lpNorm<Eigen::Infinity>() /
         std::max(analytic.lpNorm<Eigen::Infinity>(), 1e-12);
}

class Tally {
 public:
  Tally(std::string name, double limit) : result_{std::move(name), true, 0.0, limit} {}
  void add(double value) {
    result_.worst = std::max(result_.worst, value);
    result_.passed = result_.passed && std::isfinite(value) && value <= result_.limit;
  }
  const CheckResult& result() const { return result_; }

 private:
  CheckResult result_;
};

}  // namespace

std::vector<CheckResult> run_verify(const VerifyConfig& cfg) {
  Tally sampling("gaussian sample feasibility (max |Az-k|)", 1e-9);
  Tally gauss_l1("gaussian L1 closed form vs MC (std errors)", kMcSigmas);
  Tally gauss_l2("gaussian L2 closed form vs MC (std errors)", kMcSigmas);
  Tally grad_l1("gaussian L1 gradient vs finite differences", 1e-5);
  Tally grad_l2("gaussian L2 gradient vs finite differences", 1e-5);
  Tally discrete_sum("discrete sample totals (max |sum z - k|)", 0.0);
  Tally pois_l1("poisson L1 closed form vs MC (std errors)", kMcSigmas);
  Tally pois_l2("poisson L2 closed form vs MC (std errors)", kMcSigmas);
  Tally enum_l1("poisson L1 closed form vs enumeration", 1e-10);
  Tally enum_l2("poisson L2 closed form vs enumeration", 1e-10);
  Tally tv("multinomial vs restricted product-Poisson (TV)", 1e-12);

  for (Eigen::Index inst = 0; inst < cfg.n_instances; ++inst) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(inst)));
    const GaussianCase gc = gaussian_case(rng, inst % 2 == 1);
    const ConditionedGaussian cg = condition(gc.params, gc.cs);
    const Eigen::MatrixXd draws = cg.sample(rng, 1000);
    double worst = 0.0;
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      worst = std::max(worst, gc.cs.residual(draws.row(r).transpose()).lpNorm<Eigen::Infinity>());
    }
    sampling.add(worst);
    for (LossKind kind : {LossKind::L1, LossKind::L2}) {
      const double closed = expected_loss_gaussian(cg, gc.y, kind);
      const McEstimate mc = mc_expected_loss(cg, gc.y, kind, rng, cfg.mc_samples);
      const double z = std::abs(closed - mc.estimate) / std::max(mc.std_error, 1e-300);
      (kind == LossKind::L1 ? gauss_l1 : gauss_l2).add(z);
      (kind == LossKind::L1 ? grad_l1 : grad_l2).add(gradient_fd_error(gc, kind));
    }

    const PoissonCase pc = poisson_case(rng);
    const CountMatrix counts = pc.law.sample(rng, 1000);
    std::int64_t off = 0;
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
      off = std::max<std::int64_t>(off, std::abs(counts.row(r).sum() - pc.law.total()));
    }
    discrete_sum.add(static_cast<double>(off));
    for (LossKind kind : {LossKind::L1, LossKind::L2}) {
      const double closed = expected_loss_poisson(pc.law, pc.y, kind);
      const McEstimate mc = mc_expected_loss(pc.law, pc.y, kind, rng, cfg.mc_samples);
      const double z = std::abs(closed - mc.estimate) / std::max(mc.std_error, 1e-300);
      (kind == LossKind::L1 ? pois_l1 : pois_l2).add(mc.std_error == 0.0 && closed == mc.estimate ? 0.0 : z);
      (kind == LossKind::L1 ? enum_l1 : enum_l2).add(std::abs(closed - enumerated_loss(pc.law, pc.y, kind)));
    }
    tv.add(restriction_tv(pc.law));
  }

  std::vector<CheckResult> out;
  for (const Tally* t : {&sampling, &gauss_l1, &gauss_l2, &grad_l1, &grad_l2, &discrete_sum, &pois_l1,
                         &pois_l2, &enum_l1, &enum_l2, &tv}) {
    out.push_back(t->result());
  }
  return out;
}

}  // namespace eqcon::cli
