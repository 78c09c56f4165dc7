#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "eqcon/bench.hpp"
#include "eqcon/constraint.hpp"
#include "eqcon/gauss.hpp"
#include "eqcon/train.hpp"

namespace eqcon::cli {

using Json = nlohmann::json;

/// Parses a JSON file. Throws ConfigError naming the path on failure.
Json load_json_file(const std::string& path);

struct SampleConfig {
  GaussianParams params;
  ConstraintSystem constraint;
  Eigen::Index count;
  std::uint64_t seed;
};

struct DiscreteConfig {
  Eigen::VectorXd rates;
  std::int64_t total;
  Eigen::Index count;
  std::uint64_t seed;
};

struct TrainSetup {
  EncoderSpec encoder;
  TrainConfig train;
};

struct VerifyConfig {
  Eigen::Index n_instances = 5;
  Eigen::Index mc_samples = 200000;
  std::uint64_t seed = 0;
};

// Every parser rejects unknown keys, naming the first one it meets.
SampleConfig parse_sample_config(const Json& doc);
DiscreteConfig parse_discrete_config(const Json& doc);
BenchConfig parse_bench_config(const Json& doc);
TrainSetup parse_train_config(const Json& doc);
VerifyConfig parse_verify_config(const Json& doc);

}  // namespace eqcon::cli
