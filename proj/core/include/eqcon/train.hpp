#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqcon/constraint.hpp"
#include "eqcon/estim.hpp"
#include "eqcon/loss.hpp"
#include "eqcon/random.hpp"

namespace eqcon {

enum class Activation { Tanh, Relu };

std::string_view to_string(Activation act) noexcept;
Activation parse_activation(std::string_view text);

/// Fully connected encoder x -> (mean, raw scale). Widths run from the input
/// dimension through the hidden layers to 2 * n_vars outputs.
struct EncoderSpec {
  std::vector<Eigen::Index> layer_widths{3, 32, 32, 6};
  Activation activation = Activation::Tanh;
  std::uint64_t init_seed = 0;

  /// Throws ConfigError.
  void validate(Eigen::Index n_inputs, Eigen::Index n_vars) const;
};

/// Multilayer perceptron with hidden activations and a linear output layer.
/// Parameters flatten layer by layer as (W row-major, b).
class Mlp {
 public:
  struct Tape {
    std::vector<Eigen::VectorXd> inputs;  // input to each layer
    std::vector<Eigen::VectorXd> pre;     // pre-activation of each layer
  };

  explicit Mlp(const EncoderSpec& spec);

  Eigen::Index n_inputs() const noexcept { return weights_.front().cols(); }
  Eigen::Index n_outputs() const noexcept { return weights_.back().rows(); }
  Eigen::Index n_params() const noexcept;

  Eigen::VectorXd params() const;
  void set_params(const Eigen::Ref<const Eigen::VectorXd>& flat);

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x, Tape& tape) const;

  /// Adds d(output . d_out)/d(params) to `grad` (length n_params()).
  void backward(const Tape& tape, const Eigen::Ref<const Eigen::VectorXd>& d_out,
                Eigen::Ref<Eigen::VectorXd> grad) const;

  /// params -= step * grad.
  void descend(const Eigen::Ref<const Eigen::VectorXd>& grad, double step);

 private:
  double activate(double v) const;
  double activate_slope(double v) const;

  Activation activation_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Rows are examples. `rhs` holds the per-example right-hand side k(x).
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::MatrixXd rhs;

  Eigen::Index size() const noexcept { return inputs.rows(); }
};

/// Regression problem whose targets obey A y = k(x) with a fixed A.
struct RegressionTask {
  Eigen::MatrixXd matrix_a;
  Dataset train;
  Dataset val;
  Dataset test;

  Eigen::Index n_vars() const noexcept { return matrix_a.cols(); }
  Eigen::Index n_inputs() const noexcept { return train.inputs.cols(); }
};

/// Reactor-style task with inputs x1 in [0.5, 1.5], x2, x3 in [1, 2] and
/// targets y = (xi, x2 - xi, x3 - xi), xi = (1 - exp(-x1)) x2 x3 / (x2 + x3).
/// Rows: -y2 + y3 = x3 - x2 and -y1 - y2 = -x2. Noise moves targets along the
/// null direction (-1, 1, 1) only, so every target stays feasible.
RegressionTask make_cstr_task(Eigen::Index n_train, Eigen::Index n_val, Eigen::Index n_test,
                              double noise_scale, std::uint64_t seed);

enum class TrainMethod {
  ClosedFormL1,
  ClosedFormL2,
  Estimator,
  UnconstrainedBaseline,
  ProjectL2Baseline,
  ProjectL1Baseline,
};

std::string_view to_string(TrainMethod method) noexcept;
TrainMethod parse_train_method(std::string_view text);
bool is_constrained(TrainMethod method) noexcept;

struct TrainConfig {
  std::string task = "cstr";
  Eigen::Index n_samples = 500;  // split 70/10/20
  double noise_scale = 0.05;
  TrainMethod method = TrainMethod::ClosedFormL2;
  EstimatorKind estimator = EstimatorKind::MarginalExpectation;  // method == Estimator
  LossKind loss = LossKind::L2;                                  // method == Estimator
  Eigen::Index estimator_samples = 1;
  Eigen::Index epochs = 300;
  double learning_rate = 0.03;
  Eigen::Index batch_size = 16;
  double sigma_floor = 1e-3;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// Task described by the config, seeded with derive_seed(cfg.seed, 0).
RegressionTask make_task(const TrainConfig& cfg);

struct EpochRecord {
  double train_loss = 0.0;  // mean objective over the training split after the epoch
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_violation_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double test_mse = 0.0;
  double violation_rate = 0.0;
};

inline constexpr double kViolationTol = 1e-6;

/// Encoder scale head: sigma = floor + softplus(raw) >= floor.
double scale_from_raw(double raw, double floor) noexcept;

/// Plain SGD with a fixed step. Throws NonFiniteLoss on divergence.
TrainReport train_model(const EncoderSpec& spec, const TrainConfig& cfg, const RegressionTask& task);

/// Mean squared error and violation rate of the method's predictions.
struct EvalResult {
  double mse = 0.0;
  double violation_rate = 0.0;
};
EvalResult evaluate(const Mlp& net, const TrainConfig& cfg, const RegressionTask& task,
                    const Dataset& data);

/// Objective and its gradient with respect to the encoder parameters, averaged
/// over `data`. Only for the closed-form and baseline methods.
double objective_and_gradient(const Mlp& net, const TrainConfig& cfg,
                              const RegressionTask& task, const Dataset& data,
                              Eigen::Ref<Eigen::VectorXd> grad);

/// Worst norm-wise relative error |g - g_fd|_inf / |g_fd|_inf between the
/// backpropagated gradient and central differences (step 1e-5) at `n_probes`
/// random weight settings, on up to 16 training examples.
double finite_diff_check(const EncoderSpec& spec, const TrainConfig& cfg,
                         const RegressionTask& task, int n_probes);

std::string train_report_json(const EncoderSpec& spec, const TrainConfig& cfg,
                              const TrainReport& report);

}  // namespace eqcon
