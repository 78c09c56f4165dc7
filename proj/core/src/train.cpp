#include "eqcon/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "eqcon/error.hpp"
#include "eqcon/gauss.hpp"

namespace eqcon {
namespace {

void config_fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Encoder output split into the Gaussian parameters.
struct Head {
  Eigen::VectorXd mean;
  Eigen::VectorXd raw;
  Eigen::VectorXd sigma;
};

Head split_output(const Eigen::VectorXd& out, Eigen::Index n, double floor) {
  Head h{out.head(n), out.tail(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) h.sigma(i) = scale_from_raw(h.raw(i), floor);
  return h;
}

ConstraintSystem system_for(const ConstraintSystem& base, const Dataset& data, Eigen::Index row) {
  return base.with_rhs(data.rhs.row(row).transpose());
}

// Per-example objective; fills d(objective)/d(encoder output). `rng` feeds the
// estimator methods only.
double example_objective(const TrainConfig& cfg, const ConstraintSystem& cs,
                         const Eigen::VectorXd& out, const Eigen::VectorXd& y, Rng& rng,
                         Eigen::VectorXd& d_out) {
  const Eigen::Index n = y.size();
  const Head h = split_output(out, n, cfg.sigma_floor);
  d_out.resize(2 * n);
  Eigen::VectorXd d_mean;
  Eigen::VectorXd d_log_sigma;
  double loss = 0.0;

  if (is_constrained(cfg.method)) {
    const GaussianParams params = GaussianParams::diagonal(h.mean, h.sigma.cwiseAbs2());
    const LossKind kind = cfg.method == TrainMethod::ClosedFormL1   ? LossKind::L1
                          : cfg.method == TrainMethod::ClosedFormL2 ? LossKind::L2
                                                                    : cfg.loss;
    if (cfg.method == TrainMethod::Estimator) {
      const GaussianGradientEstimator est(params, cs, y, kind);
      loss = expected_loss_gaussian(est.conditioned(), y, kind);
      const GradEstimate g = est.estimate(cfg.estimator, rng, cfg.estimator_samples);
      d_mean = g.grad_mean;
      d_log_sigma = g.grad_scale;
    } else {
      loss = expected_loss_gaussian(condition(params, cs), y, kind);
      const ParamGradient g = grad_expected_loss_gaussian(params, cs, y, kind);
      d_mean = g.mean;
      d_log_sigma = g.scale;
    }
  } else {
    // Unconstrained Gaussian under L2: |mean - y|^2 + sum sigma^2.
    const Eigen::VectorXd diff = h.mean - y;
    loss = diff.squaredNorm() + h.sigma.squaredNorm();
    d_mean = 2.0 * diff;
    d_log_sigma = 2.0 * h.sigma.cwiseAbs2();
  }

  d_out.head(n) = d_mean;
  for (Eigen::Index i = 0; i < n; ++i) {
    d_out(n + i) = d_log_sigma(i) * sigmoid(h.raw(i)) / h.sigma(i);
  }
  if (!std::isfinite(loss) || !d_out.allFinite()) {
    throw Error(ErrorCode::NonFiniteLoss, "training diverged; lower the learning rate");
  }
  return loss;
}

Eigen::VectorXd predict(const TrainConfig& cfg, const ConstraintSystem& cs, const Eigen::VectorXd& out,
                        Eigen::Index n) {
  const Head h = split_output(out, n, cfg.sigma_floor);
  switch (cfg.method) {
    case TrainMethod::UnconstrainedBaseline:
      return h.mean;
    case TrainMethod::ProjectL2Baseline:
      return project_l2(cs, h.mean);
    case TrainMethod::ProjectL1Baseline:
      return project_l1(cs, h.mean);
    default:
      return ConditioningMap(GaussianParams::diagonal(h.mean, h.sigma.cwiseAbs2()), cs).cond_mean;
  }
}

Dataset slice(const Dataset& d, Eigen::Index start, Eigen::Index count) {
  return {d.inputs.middleRows(start, count), d.targets.middleRows(start, count),
          d.rhs.middleRows(start, count)};
}

}  // namespace

std::string_view to_string(Activation act) noexcept { return act == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::Tanh;
  if (text == "relu") return Activation::Relu;
  throw Error(ErrorCode::ConfigError, "unknown activation '" + std::string(text) + "'");
}

void EncoderSpec::validate(Eigen::Index n_inputs, Eigen::Index n_vars) const {
  if (layer_widths.size() < 3) config_fail("layer_widths needs input, >= 1 hidden and output widths");
  for (Eigen::Index w : layer_widths) {
    if (w < 1) config_fail("layer widths must be positive");
  }
  if (layer_widths.front() != n_inputs) {
    config_fail("first layer width must equal the input dimension " + std::to_string(n_inputs));
  }
  if (layer_widths.back() != 2 * n_vars) {
    config_fail("last layer width must equal 2 * n_vars = " + std::to_string(2 * n_vars));
  }
}

Mlp::Mlp(const EncoderSpec& spec) : activation_(spec.activation) {
  if (spec.layer_widths.size() < 2) config_fail("an encoder needs at least two widths");
  Rng rng(spec.init_seed);
  std::normal_distribution<double> normal;
  const double gain = activation_ == Activation::Relu ? 2.0 : 1.0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const Eigen::Index in = spec.layer_widths[l];
    const Eigen::Index out = spec.layer_widths[l + 1];
    const double scale = std::sqrt(gain / static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) w(r, c) = scale * normal(rng);
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

Eigen::Index Mlp::n_params() const noexcept {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) total += weights_[l].size() + biases_[l].size();
  return total;
}

Eigen::VectorXd Mlp::params() const {
  Eigen::VectorXd flat(n_params());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      flat.segment(pos, weights_[l].cols()) = weights_[l].row(r).transpose();
      pos += weights_[l].cols();
    }
    flat.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return flat;
}

void Mlp::set_params(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != n_params()) throw Error(ErrorCode::DimensionMismatch, "parameter count differs");
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      weights_[l].row(r) = flat.segment(pos, weights_[l].cols()).transpose();
      pos += weights_[l].cols();
    }
    biases_[l] = flat.segment(pos, biases_[l].size());
    pos += biases_[l].size();
  }
}

double Mlp::activate(double v) const { return activation_ == Activation::Tanh ? std::tanh(v) : std::max(v, 0.0); }

double Mlp::activate_slope(double v) const {
  if (activation_ == Activation::Tanh) {
    const double t = std::tanh(v);
    return 1.0 - t * t;
  }
  return v > 0.0 ? 1.0 : 0.0;
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Tape tape;
  return forward(x, tape);
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& x, Tape& tape) const {
  if (x.size() != n_inputs()) throw Error(ErrorCode::DimensionMismatch, "encoder input size differs");
  tape.inputs.clear();
  tape.pre.clear();
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    tape.inputs.push_back(h);
    Eigen::VectorXd z = weights_[l] * h + biases_[l];
    tape.pre.push_back(z);
    if (l + 1 < weights_.size()) {
      h = z.unaryExpr([this](double v) { return activate(v); });
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void Mlp::backward(const Tape& tape, const Eigen::Ref<const Eigen::VectorXd>& d_out,
                   Eigen::Ref<Eigen::VectorXd> grad) const {
  // Offsets of each layer's block in the flat layout.
  std::vector<Eigen::Index> offset(weights_.size());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offset[l] = pos;
    pos += weights_[l].size() + biases_[l].size();
  }
  Eigen::VectorXd delta = d_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Eigen::Index rows = weights_[l].rows();
    const Eigen::Index cols = weights_[l].cols();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad.data() + offset[l], rows, cols);
    gw.noalias() += delta * tape.inputs[l].transpose();
    grad.segment(offset[l] + rows * cols, rows) += delta;
    if (l > 0) {
      Eigen::VectorXd back = weights_[l].transpose() * delta;
      for (Eigen::Index i = 0; i < back.size(); ++i) back(i) *= activate_slope(tape.pre[l - 1](i));
      delta = std::move(back);
    }
  }
}

double scale_from_raw(double raw, double floor) noexcept { return floor + softplus(raw); }

void Mlp::descend(const Eigen::Ref<const Eigen::VectorXd>& grad, double step) {
  set_params(params() - step * grad);
}

RegressionTask make_cstr_task(Eigen::Index n_train, Eigen::Index n_val, Eigen::Index n_test,
                              double noise_scale, std::uint64_t seed) {
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw Error(ErrorCode::InvalidArgument, "every split needs at least one example");
  }
  if (!(noise_scale >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_scale must be >= 0");
  RegressionTask task;
  task.matrix_a.resize(2, 3);
  task.matrix_a << 0.0, -1.0, 1.0, -1.0, -1.0, 0.0;

  Rng rng(seed);
  std::uniform_real_distribution<double> u1(0.5, 1.5);
  std::uniform_real_distribution<double> u23(1.0, 2.0);
  std::normal_distribution<double> normal;
  const Eigen::Vector3d null_dir = Eigen::Vector3d(-1.0, 1.0, 1.0) / std::sqrt(3.0);

  auto generate = [&](Eigen::Index count) {
    Dataset d{Eigen::MatrixXd(count, 3), Eigen::MatrixXd(count, 3), Eigen::MatrixXd(count, 2)};
    for (Eigen::Index r = 0; r < count; ++r) {
      const double x1 = u1(rng);
      const double x2 = u23(rng);
      const double x3 = u23(rng);
      const double xi = (1.0 - std::exp(-x1)) * x2 * x3 / (x2 + x3);
      Eigen::Vector3d y(xi, x2 - xi, x3 - xi);
      if (noise_scale > 0.0) y += noise_scale * normal(rng) * null_dir;
      d.inputs.row(r) << x1, x2, x3;
      d.targets.row(r) = y.transpose();
      d.rhs.row(r) << x3 - x2, -x2;
    }
    return d;
  };
  task.train = generate(n_train);
  task.val = generate(n_val);
  task.test = generate(n_test);
  return task;
}

std::string_view to_string(TrainMethod method) noexcept {
  switch (method) {
    case TrainMethod::ClosedFormL1: return "ClosedFormL1";
    case TrainMethod::ClosedFormL2: return "ClosedFormL2";
    case TrainMethod::Estimator: return "Estimator";
    case TrainMethod::UnconstrainedBaseline: return "UnconstrainedBaseline";
    case TrainMethod::ProjectL2Baseline: return "ProjectL2Baseline";
    case TrainMethod::ProjectL1Baseline: return "ProjectL1Baseline";
  }
  return "?";
}

TrainMethod parse_train_method(std::string_view text) {
  for (TrainMethod m : {TrainMethod::ClosedFormL1, TrainMethod::ClosedFormL2, TrainMethod::Estimator,
                        TrainMethod::UnconstrainedBaseline, TrainMethod::ProjectL2Baseline,
                        TrainMethod::ProjectL1Baseline}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown training method '" + std::string(text) + "'");
}

bool is_constrained(TrainMethod method) noexcept {
  return method == TrainMethod::ClosedFormL1 || method == TrainMethod::ClosedFormL2 ||
         method == TrainMethod::Estimator;
}

void TrainConfig::validate() const {
  if (task != "cstr") config_fail("unknown task '" + task + "'");
  if (n_samples < 10) config_fail("n_samples must be >= 10");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) config_fail("noise_scale must be >= 0");
  if (estimator_samples < 1) config_fail("estimator_samples must be >= 1");
  if (epochs < 1) config_fail("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) config_fail("learning_rate must be > 0");
  if (batch_size < 1) config_fail("batch_size must be >= 1");
  if (!(sigma_floor > 0.0) || !std::isfinite(sigma_floor)) config_fail("sigma_floor must be > 0");
}

RegressionTask make_task(const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n_train = cfg.n_samples * 7 / 10;
  const Eigen::Index n_val = cfg.n_samples / 10;
  const Eigen::Index n_test = cfg.n_samples - n_train - n_val;
  return make_cstr_task(n_train, n_val, n_test, cfg.noise_scale, derive_seed(cfg.seed, 0));
}

EvalResult evaluate(const Mlp& net, const TrainConfig& cfg, const RegressionTask& task,
                    const Dataset& data) {
  const ConstraintSystem base(task.matrix_a, data.rhs.row(0).transpose());
  const Eigen::Index n = task.n_vars();
  EvalResult out;
  Eigen::Index violations = 0;
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    const ConstraintSystem cs = system_for(base, data, r);
    const Eigen::VectorXd pred = predict(cfg, cs, net.forward(data.inputs.row(r).transpose()), n);
    out.mse += (pred - data.targets.row(r).transpose()).squaredNorm();
    if (!cs.is_satisfied(pred, kViolationTol)) ++violations;
  }
  const auto rows = static_cast<double>(data.size());
  out.mse /= rows * static_cast<double>(n);
  out.violation_rate = static_cast<double>(violations) / rows;
  return out;
}

double objective_and_gradient(const Mlp& net, const TrainConfig& cfg, const RegressionTask& task,
                              const Dataset& data, Eigen::Ref<Eigen::VectorXd> grad) {
  if (cfg.method == TrainMethod::Estimator) {
    throw Error(ErrorCode::InvalidArgument, "estimator methods have no exact objective gradient");
  }
  const ConstraintSystem base(task.matrix_a, data.rhs.row(0).transpose());
  grad.setZero();
  Rng unused(0);
  Mlp::Tape tape;
  Eigen::VectorXd d_out;
  double total = 0.0;
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    const Eigen::VectorXd out = net.forward(data.inputs.row(r).transpose(), tape);
    total += example_objective(cfg, system_for(base, data, r), out, data.targets.row(r).transpose(),
                               unused, d_out);
    net.backward(tape, d_out, grad);
  }
  const auto rows = static_cast<double>(data.size());
  grad /= rows;
  return total / rows;
}

TrainReport train_model(const EncoderSpec& spec, const TrainConfig& cfg, const RegressionTask& task) {
  cfg.validate();
  spec.validate(task.n_inputs(), task.n_vars());
  Mlp net(spec);
  const ConstraintSystem base(task.matrix_a, task.train.rhs.row(0).transpose());
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng estimator_rng(derive_seed(cfg.seed, 2));

  // Objective monitor: estimator runs are tracked with the closed form of
  // their loss.
  TrainConfig monitor = cfg;
  if (cfg.method == TrainMethod::Estimator) {
    monitor.method = cfg.loss == LossKind::L1 ? TrainMethod::ClosedFormL1 : TrainMethod::ClosedFormL2;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(task.train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd grad(net.n_params());
  Eigen::VectorXd scratch(net.n_params());
  Mlp::Tape tape;
  Eigen::VectorXd d_out;

  TrainReport report;
  for (Eigen::Index epoch = 0; epoch < cfg.epochs; ++epoch) try {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.setZero();
      for (std::size_t b = start; b < stop; ++b) {
        const Eigen::Index r = order[b];
        const Eigen::VectorXd out = net.forward(task.train.inputs.row(r).transpose(), tape);
        example_objective(cfg, system_for(base, task.train, r), out,
                          task.train.targets.row(r).transpose(), estimator_rng, d_out);
        net.backward(tape, d_out, grad);
      }
      net.descend(grad / static_cast<double>(stop - start), cfg.learning_rate);
    }

    EpochRecord rec;
    rec.train_loss = objective_and_gradient(net, monitor, task, task.train, scratch);
    if (!std::isfinite(rec.train_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "training diverged; lower the learning rate");
    }
    rec.train_mse = evaluate(net, cfg, task, task.train).mse;
    rec.val_mse = evaluate(net, cfg, task, task.val).mse;
    rec.test_violation_rate = evaluate(net, cfg, task, task.test).violation_rate;
    report.epochs.push_back(rec);
  } catch (const Error& e) {
    // Runaway scales surface first as a singular conditioning system.
    if (e.code() != ErrorCode::IllConditioned) throw;
    throw Error(ErrorCode::NonFiniteLoss, std::string("training diverged; lower the learning rate (") +
                                              e.what() + ")");
  }
  const EvalResult test = evaluate(net, cfg, task, task.test);
  report.test_mse = test.mse;
  report.violation_rate = test.violation_rate;
  return report;
}

double finite_diff_check(const EncoderSpec& spec, const TrainConfig& cfg, const RegressionTask& task,
                         int n_probes) {
  if (n_probes < 1) throw Error(ErrorCode::InvalidArgument, "n_probes must be >= 1");
  spec.validate(task.n_inputs(), task.n_vars());
  const Dataset data = slice(task.train, 0, std::min<Eigen::Index>(16, task.train.size()));
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < n_probes; ++probe) {
    EncoderSpec probe_spec = spec;
    probe_spec.init_seed = derive_seed(spec.init_seed, static_cast<std::uint64_t>(probe));
    Mlp net(probe_spec);
    Eigen::VectorXd analytic(net.n_params());
    Eigen::VectorXd scratch(net.n_params());
    objective_and_gradient(net, cfg, task, data, analytic);

    const Eigen::VectorXd theta = net.params();
    Eigen::VectorXd numeric(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Eigen::VectorXd shifted = theta;
      shifted(j) = theta(j) + kStep;
      net.set_params(shifted);
      const double up = objective_and_gradient(net, cfg, task, data, scratch);
      shifted(j) = theta(j) - kStep;
      net.set_params(shifted);
      const double down = objective_and_gradient(net, cfg, task, data, scratch);
      numeric(j) = (up - down) / (2.0 * kStep);
    }
    const double scale = std::max(numeric.lpNorm<Eigen::Infinity>(), 1e-12);
    worst = std::max(worst, (analytic - numeric).lpNorm<Eigen::Infinity>() / scale);
  }
  return worst;
}

std::string train_report_json(const EncoderSpec& spec, const TrainConfig& cfg, const TrainReport& report) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["config"] = {
      {"task", cfg.task},
      {"n_samples", cfg.n_samples},
      {"noise_scale", cfg.noise_scale},
      {"method", std::string(to_string(cfg.method))},
      {"estimator", std::string(to_string(cfg.estimator))},
      {"loss", std::string(to_string(cfg.loss))},
      {"estimator_samples", cfg.estimator_samples},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"sigma_floor", cfg.sigma_floor},
      {"seed", cfg.seed},
      {"encoder",
       {{"layer_widths", spec.layer_widths},
        {"activation", std::string(to_string(spec.activation))},
        {"init_seed", spec.init_seed}}},
  };
  ordered_json epochs = ordered_json::array();
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    const EpochRecord& r = report.epochs[e];
    epochs.push_back({{"epoch", e + 1},
                      {"train_loss", r.train_loss},
                      {"train_mse", r.train_mse},
                      {"val_mse", r.val_mse},
                      {"test_violation_rate", r.test_violation_rate}});
  }
  doc["epochs"] = std::move(epochs);
  doc["test_mse"] = report.test_mse;
  doc["violation_rate"] = report.violation_rate;
  return doc.dump(2) + "\n";
}

}  // namespace eqcon
