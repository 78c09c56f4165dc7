#include "config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "eqcon/error.hpp"

namespace eqcon::cli {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

// Strict view of one JSON object: every key must be in `allowed`.
class Fields {
 public:
  Fields(const Json& obj, std::string context, std::initializer_list<const char*> allowed)
      : obj_(obj), context_(std::move(context)) {
    if (!obj.is_object()) fail(context_ + " must be a JSON object");
    for (const auto& item : obj.items()) {
      bool known = false;
      for (const char* key : allowed) known = known || item.key() == key;
      if (!known) fail("unknown key '" + item.key() + "' in " + context_);
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const Json& at(const char* key) const {
    if (!obj_.contains(key)) fail("missing key '" + std::string(key) + "' in " + context_);
    return obj_.at(key);
  }

  double real(const char* key) const {
    const Json& v = at(key);
    if (!v.is_number()) fail(where(key) + " must be a number");
    return v.get<double>();
  }
  double real(const char* key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::int64_t integer(const char* key) const {
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(where(key) + " must be an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const char* key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t seed(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number_unsigned()) fail(where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_string()) fail(where(key) + " must be a string");
    return v.get<std::string>();
  }

  Eigen::VectorXd vector(const char* key) const { return to_vector(at(key), where(key)); }

  Eigen::MatrixXd matrix(const char* key) const {
    const Json& v = at(key);
    if (!v.is_array() || v.empty() || !v.front().is_array()) fail(where(key) + " must be a list of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::VectorXd row = to_vector(v[static_cast<std::size_t>(r)], where(key));
      if (row.size() != cols) fail(where(key) + " has rows of different lengths");
      m.row(r) = row.transpose();
    }
    return m;
  }

  std::string where(const char* key) const { return "'" + std::string(key) + "' in " + context_; }

 private:
  static Eigen::VectorXd to_vector(const Json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where + " must be a non-empty list of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(where + " must contain only numbers");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

  const Json& obj_;
  std::string context_;
};

Eigen::Index positive(const Fields& f, const char* key, std::int64_t fallback) {
  const std::int64_t v = f.integer(key, fallback);
  if (v < 1) fail(f.where(key) + " must be >= 1");
  return static_cast<Eigen::Index>(v);
}

Eigen::Index positive(const Fields& f, const char* key) {
  const std::int64_t v = f.integer(key);
  if (v < 1) fail(f.where(key) + " must be >= 1");
  return static_cast<Eigen::Index>(v);
}

GaussianParams gaussian_from(const Fields& f) {
  const Eigen::VectorXd mean = f.vector("mean");
  if (f.has("variances") == f.has("covariance")) {
    fail("sample config needs exactly one of 'variances' or 'covariance'");
  }
  if (f.has("variances")) return GaussianParams::diagonal(mean, f.vector("variances"));
  return GaussianParams::full(mean, f.matrix("covariance"));
}

}  // namespace

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const Json::parse_error& e) {
    fail("config '" + path + "' is not valid JSON: " + e.what());
  }
}

SampleConfig parse_sample_config(const Json& doc) {
  const Fields f(doc, "sample config", {"mean", "variances", "covariance", "A", "k", "count", "seed"});
  return {gaussian_from(f), ConstraintSystem(f.matrix("A"), f.vector("k")), positive(f, "count"),
          f.seed("seed", 0)};
}

DiscreteConfig parse_discrete_config(const Json& doc) {
  const Fields f(doc, "discrete sample config", {"rates", "total", "count", "seed"});
  const std::int64_t total = f.integer("total");
  if (total < 0) fail(f.where("total") + " must be >= 0");
  return {f.vector("rates"), total, positive(f, "count"), f.seed("seed", 0)};
}

BenchConfig parse_bench_config(const Json& doc) {
  const Fields f(doc, "bench config",
                 {"n_vars", "n_constraints", "n_param_sets", "n_grad_samples", "loss_kind", "family",
                  "seed"});
  BenchConfig cfg;
  cfg.n_vars = positive(f, "n_vars", cfg.n_vars);
  cfg.n_constraints = positive(f, "n_constraints", cfg.n_constraints);
  cfg.n_param_sets = positive(f, "n_param_sets", cfg.n_param_sets);
  cfg.n_grad_samples = positive(f, "n_grad_samples", cfg.n_grad_samples);
  cfg.loss_kind = parse_loss_kind(f.text("loss_kind", std::string(to_string(cfg.loss_kind))));
  cfg.family = parse_family(f.text("family", std::string(to_string(cfg.family))));
  cfg.seed = f.seed("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

TrainSetup parse_train_config(const Json& doc) {
  const Fields f(doc, "train config",
                 {"task", "n_samples", "noise_scale", "method", "estimator", "loss", "estimator_samples",
                  "epochs", "learning_rate", "batch_size", "sigma_floor", "seed", "encoder"});
  TrainSetup out;
  TrainConfig& cfg = out.train;
  cfg.task = f.text("task", cfg.task);
  cfg.n_samples = positive(f, "n_samples", cfg.n_samples);
  cfg.noise_scale = f.real("noise_scale", cfg.noise_scale);
  cfg.method = parse_train_method(f.text("method", std::string(to_string(cfg.method))));
  cfg.estimator = parse_estimator_kind(f.text("estimator", std::string(to_string(cfg.estimator))));
  cfg.loss = parse_loss_kind(f.text("loss", std::string(to_string(cfg.loss))));
  cfg.estimator_samples = positive(f, "estimator_samples", cfg.estimator_samples);
  cfg.epochs = positive(f, "epochs", cfg.epochs);
  cfg.learning_rate = f.real("learning_rate", cfg.learning_rate);
  cfg.batch_size = positive(f, "batch_size", cfg.batch_size);
  cfg.sigma_floor = f.real("sigma_floor", cfg.sigma_floor);
  cfg.seed = f.seed("seed", cfg.seed);
  cfg.validate();

  if (f.has("encoder")) {
    const Fields e(f.at("encoder"), "encoder", {"layer_widths", "activation", "init_seed"});
    EncoderSpec& spec = out.encoder;
    if (e.has("layer_widths")) {
      const Json& widths = e.at("layer_widths");
      if (!widths.is_array()) fail(e.where("layer_widths") + " must be a list of integers");
      spec.layer_widths.clear();
      for (const Json& w : widths) {
        if (!w.is_number_integer()) fail(e.where("layer_widths") + " must be a list of integers");
        spec.layer_widths.push_back(w.get<Eigen::Index>());
      }
    }
    spec.activation = parse_activation(e.text("activation", std::string(to_string(spec.activation))));
    spec.init_seed = e.seed("init_seed", spec.init_seed);
  }
  return out;
}

VerifyConfig parse_verify_config(const Json& doc) {
  const Fields f(doc, "verify config", {"n_instances", "mc_samples", "seed"});
  VerifyConfig cfg;
  cfg.n_instances = positive(f, "n_instances", cfg.n_instances);
  cfg.mc_samples = positive(f, "mc_samples", cfg.mc_samples);
  if (cfg.mc_samples < 2) fail(f.where("mc_samples") + " must be >= 2");
  cfg.seed = f.seed("seed", cfg.seed);
  return cfg;
}

}  // namespace eqcon::cli
