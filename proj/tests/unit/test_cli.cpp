#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqcon_cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "eqcon");
  std::ostringstream out;
  std::ostringstream err;
  const int code = eqcon::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "eqcon_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shipped(const std::string& name) { return std::string(EQCON_CONFIG_DIR) + "/" + name; }

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string& header) {
  std::istringstream in(text);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) row.push_back(std::stod(f));
    rows.push_back(row);
  }
  return rows;
}

void check_error_line(const std::string& err, const std::string& code) {
  REQUIRE(!err.empty());
  CHECK(err.back() == '\n');
  CHECK(err.find('\n') == err.size() - 1);
  const auto doc = nlohmann::json::parse(err);
  CHECK(doc.at("error") == code);
  CHECK(doc.at("message").is_string());
}

}  // namespace

TEST_CASE("sample sum-to-zero") {
  const Outcome r = run({"sample", "--config", shipped("sample_sum_to_zero.json")});
  REQUIRE(r.code == 0);
  std::string header;
  const auto rows = parse_csv(r.out, header);
  CHECK(header == "z0,z1");
  REQUIRE(rows.size() == 5);
  for (const auto& row : rows) CHECK(std::abs(row[0] + row[1]) <= 1e-9);
  CHECK(r.out.back() == '\n');
  CHECK(run({"sample", "--config", shipped("sample_sum_to_zero.json")}).out == r.out);
  CHECK(run({"sample", "--config", shipped("sample_sum_to_zero.json"), "--seed", "9"}).out != r.out);
}

TEST_CASE("sample discrete") {
  const std::string out = (scratch_dir() / "discrete.csv").string();
  const Outcome r = run({"sample", "--discrete", "--config", shipped("sample_discrete.json"), "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::string header;
  const auto rows = parse_csv(read_file(out), header);
  REQUIRE(rows.size() == 5);
  for (const auto& row : rows) CHECK(row[0] + row[1] == 4.0);
}

TEST_CASE("unknown keys are named") {
  const std::string path = write_file("typo.json",
                                      R"({"mean":[0,0],"variances":[1,1],"A":[[1,1]],"k":[0],"cuont":5,"seed":0})");
  const Outcome r = run({"sample", "--config", path});
  CHECK(r.code == 1);
  check_error_line(r.err, "ConfigError");
  CHECK(r.err.find("cuont") != std::string::npos);

  const std::string bench = write_file("bench_typo.json", R"({"n_vars":4,"n_constraint":1})");
  const Outcome b = run({"bench", "--config", bench});
  CHECK(b.code == 1);
  CHECK(b.err.find("n_constraint") != std::string::npos);

  const std::string train = write_file("train_typo.json", R"({"epochs":2,"encoder":{"widths":[3,6]}})");
  const Outcome t = run({"train", "--config", train});
  CHECK(t.code == 1);
  CHECK(t.err.find("widths") != std::string::npos);
}

TEST_CASE("validation failures exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  const Outcome missing = run({"bench", "--config", (scratch_dir() / "absent.json").string()});
  CHECK(missing.code == 1);
  check_error_line(missing.err, "ConfigError");
  const std::string bad = write_file("bad_rank.json", R"({"mean":[0,0,0],"variances":[1,1,1],)"
                                                       R"("A":[[1,1,0],[2,2,0]],"k":[0,0],"count":1,"seed":0})");
  const Outcome rank = run({"sample", "--config", bad});
  CHECK(rank.code == 1);
  check_error_line(rank.err, "RankDeficient");
  CHECK(run({"bench", "--config", shipped("bench_gaussian_l1.json"), "--threads", "0"}).code == 1);
}

TEST_CASE("numeric failures exit 2") {
  const std::string ill = write_file("ill.json", R"({"mean":[0,0,0],"variances":[1,1,1],)"
                                                 R"("A":[[1,1,0],[1,1.000000001,0]],"k":[0,0],"count":1,"seed":0})");
  const Outcome r = run({"sample", "--config", ill});
  CHECK(r.code == 2);
  check_error_line(r.err, "IllConditioned");

  const std::string diverge = write_file(
      "diverge.json", R"({"n_samples":50,"epochs":3,"learning_rate":1e6,"encoder":{"layer_widths":[3,8,6]}})");
  const Outcome d = run({"train", "--config", diverge});
  CHECK(d.code == 2);
  check_error_line(d.err, "NonFiniteLoss");
}

TEST_CASE("bench output is byte-identical across runs and threads") {
  const std::string cfg = write_file(
      "bench_small.json",
      R"({"n_vars":6,"n_constraints":2,"n_param_sets":4,"n_grad_samples":200,"loss_kind":"L2","family":"Gaussian","seed":3})");
  const std::string a = (scratch_dir() / "a.csv").string();
  const std::string b = (scratch_dir() / "b.csv").string();
  REQUIRE(run({"bench", "--config", cfg, "--out", a, "--threads", "1"}).code == 0);
  REQUIRE(run({"bench", "--config", cfg, "--out", b, "--threads", "3"}).code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a).back() == '\n');
  const std::string mirror_a = (scratch_dir() / "a.json").string();
  REQUIRE(fs::exists(mirror_a));
  CHECK(read_file(mirror_a) == read_file((scratch_dir() / "b.json").string()));
  const auto doc = nlohmann::json::parse(read_file(mirror_a));
  CHECK(doc.at("config").at("seed") == 3);
  CHECK(run({"bench", "--config", cfg}).out == read_file(a));
  CHECK(run({"bench", "--config", cfg, "--seed", "4"}).out != read_file(a));
}

TEST_CASE("train writes a report") {
  const std::string cfg = write_file(
      "train_small.json",
      R"({"n_samples":60,"epochs":3,"method":"ProjectL2Baseline","encoder":{"layer_widths":[3,8,6],"activation":"relu"}})");
  const std::string out = (scratch_dir() / "train.json").string();
  REQUIRE(run({"train", "--config", cfg, "--out", out, "--seed", "12"}).code == 0);
  const std::string text = read_file(out);
  CHECK(text.back() == '\n');
  const auto doc = nlohmann::json::parse(text);
  CHECK(doc.at("config").at("seed") == 12);
  CHECK(doc.at("epochs").size() == 3);
  CHECK(doc.at("violation_rate") == 0.0);
  REQUIRE(run({"train", "--config", cfg, "--out", out, "--seed", "12"}).code == 0);
  CHECK(read_file(out) == text);
}

TEST_CASE("verify passes on the shipped config") {
  const std::string out = (scratch_dir() / "verify.csv").string();
  const Outcome r = run({"verify", "--config", shipped("verify.json"), "--out", out});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.err.empty());
  const std::string csv = read_file(out);
  CHECK(csv.rfind("check,result,worst,limit\n", 0) == 0);
  CHECK(csv.back() == '\n');
}

TEST_CASE("help exits cleanly") {
  const Outcome r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("bench") != std::string::npos);
}
