#include "eqcon_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "eqcon/bench.hpp"
#include "eqcon/discrete.hpp"
#include "eqcon/error.hpp"
#include "eqcon/format.hpp"
#include "eqcon/train.hpp"
#include "verify.hpp"

namespace eqcon::cli {
namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool discrete = false;
};

void add_common(CLI::App& sub, Options& opt, bool config_required) {
  auto* cfg = sub.add_option("--config", opt.config, "JSON configuration file");
  if (config_required) cfg->required();
  sub.add_option("--out", opt.out, "output file (default: standard output)");
  sub.add_option("--seed", opt.seed, "override the configured seed");
  sub.add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
}

std::string json_escape(const std::string& s) { return nlohmann::json(s).dump(); }

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << "{\"error\":" << json_escape(std::string(code)) << ",\"message\":" << json_escape(message)
      << "}\n";
}

void emit(const Options& opt, std::ostream& out, const std::string& text) {
  if (opt.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(opt.out, std::ios::binary);
  if (!file) throw Error(ErrorCode::ConfigError, "cannot write '" + opt.out + "'");
  file << text;
  if (!file) throw Error(ErrorCode::ConfigError, "failed writing '" + opt.out + "'");
}

std::string header_row(Eigen::Index n) {
  std::string row;
  for (Eigen::Index i = 0; i < n; ++i) row += (i ? ",z" : "z") + std::to_string(i);
  return row + "\n";
}

std::string run_sample(const Options& opt) {
  const Json doc = load_json_file(opt.config);
  std::ostringstream csv;
  if (opt.discrete) {
    const DiscreteConfig cfg = parse_discrete_config(doc);
    const ExactlyK law(cfg.rates, cfg.total);
    Rng rng(opt.seed.value_or(cfg.seed));
    const CountMatrix draws = law.sample(rng, cfg.count);
    csv << header_row(law.dim());
    for (Eigen::Index r = 0; r < draws.rows(); ++r) {
      for (Eigen::Index c = 0; c < draws.cols(); ++c) csv << (c ? "," : "") << draws(r, c);
      csv << '\n';
    }
    return csv.str();
  }
  const SampleConfig cfg = parse_sample_config(doc);
  const ConditionedGaussian cg = condition(cfg.params, cfg.constraint);
  Rng rng(opt.seed.value_or(cfg.seed));
  const Eigen::MatrixXd draws = cg.sample(rng, cfg.count);
  csv << header_row(cg.dim());
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < draws.cols(); ++c) csv << (c ? "," : "") << format_double(draws(r, c));
    csv << '\n';
  }
  return csv.str();
}

int run_verify_cmd(const Options& opt, std::ostream& out, std::ostream& err) {
  VerifyConfig cfg;
  if (!opt.config.empty()) cfg = parse_verify_config(load_json_file(opt.config));
  if (opt.seed) cfg.seed = *opt.seed;
  const std::vector<CheckResult> results = run_verify(cfg);

  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream table;
  std::ostringstream csv;
  csv << "check,result,worst,limit\n";
  table << std::left << std::setw(static_cast<int>(width)) << "check" << "  result  worst / limit\n";
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    const char* verdict = r.passed ? "PASS" : "FAIL";
    table << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << verdict << "    "
          << format_double(r.worst) << " / " << format_double(r.limit) << '\n';
    csv << '"' << r.name << "\"," << verdict << ',' << format_double(r.worst) << ','
        << format_double(r.limit) << '\n';
  }
  out << table.str();
  if (!opt.out.empty()) emit(opt, out, csv.str());
  if (!all) {
    report_error(err, "VerificationFailed", "one or more oracle checks failed");
    return 2;
  }
  return 0;
}

std::string mirror_path(const std::string& out) {
  std::filesystem::path p(out);
  if (p.extension() == ".csv") return p.replace_extension(".json").string();
  return out + ".json";
}

void run_bench_cmd(const Options& opt, std::ostream& out) {
  BenchConfig cfg = parse_bench_config(load_json_file(opt.config));
  if (opt.seed) cfg.seed = *opt.seed;
  const std::vector<EstimatorReport> reports = run_bench(cfg, opt.threads);
  emit(opt, out, bench_report_csv(cfg, reports));
  if (!opt.out.empty()) {
    Options mirror = opt;
    mirror.out = mirror_path(opt.out);
    emit(mirror, out, bench_report_json(cfg, reports));
  }
}

void run_train_cmd(const Options& opt, std::ostream& out) {
  TrainSetup setup = parse_train_config(load_json_file(opt.config));
  if (opt.seed) setup.train.seed = *opt.seed;
  const RegressionTask task = make_task(setup.train);
  const TrainReport report = train_model(setup.encoder, setup.train, task);
  emit(opt, out, train_report_json(setup.encoder, setup.train, report));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian and Poisson laws under linear equality constraints", "eqcon"};
  app.require_subcommand(1);
  Options opt;

  auto* sample = app.add_subcommand("sample", "exact draws from a constrained law as CSV");
  add_common(*sample, opt, true);
  sample->add_flag("--discrete", opt.discrete, "sample the exactly-k Poisson law");
  auto* verify = app.add_subcommand("verify", "run the closed-form oracle suite");
  add_common(*verify, opt, false);
  auto* bench = app.add_subcommand("bench", "compare gradient estimators");
  add_common(*bench, opt, true);
  auto* train = app.add_subcommand("train", "train an encoder on a constrained regression task");
  add_common(*train, opt, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what());
    return 1;
  }

  try {
    if (sample->parsed()) emit(opt, out, run_sample(opt));
    if (verify->parsed()) return run_verify_cmd(opt, out, err);
    if (bench->parsed()) run_bench_cmd(opt, out);
    if (train->parsed()) run_train_cmd(opt, out);
    return 0;
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    return is_numeric_failure(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return 1;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, out, err);
}

}  // namespace eqcon::cli
