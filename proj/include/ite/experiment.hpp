#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ite/dataset.hpp"
#include "ite/datagen.hpp"
#include "ite/learners.hpp"
#include "ite/metrics.hpp"
#include "ite/oracle.hpp"

namespace ite {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CsvSource {
  std::string path;
  CsvSchema schema;
  std::optional<double> noise_sd;  // enables bound verification on loaded data
};

// One experiment: a data source, a split, an oracle recipe, a learner
// list, and the seeds to average over. Every stage seed is derived from
// the per-run seed by a fixed mixing function, so the whole pipeline is a
// pure function of this config.
struct ExperimentConfig {
  std::string name = "experiment";
  std::optional<DgpConfig> dgp;
  std::optional<JobsLikeConfig> jobs;
  std::optional<CsvSource> csv;
  SplitSpec split;
  TrainConfig oracle;
  std::vector<LearnerSpec> learners;
  std::vector<std::uint64_t> seeds;
  double b_phi = 1.0;
  std::string output_dir = "out";
  std::string format = "csv";

  void validate() const;
  std::optional<double> noise_sd() const;  // present when bounds are verifiable
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);
std::string config_hash(const ExperimentConfig& cfg);

// Canonical artifact paths under cfg.output_dir.
std::string data_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string params_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string oracle_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string model_path(const ExperimentConfig& cfg, std::uint64_t seed,
                       const std::string& label, const std::string& variant);
std::string eval_csv_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string eval_json_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string bounds_path(const ExperimentConfig& cfg, std::uint64_t seed);
std::string benchmark_path(const ExperimentConfig& cfg);
std::string manifest_path(const ExperimentConfig& cfg);

// Pipeline stages; each consumes the previous stage's artifacts and fails
// with an error naming the missing file.
void stage_gen_data(const ExperimentConfig& cfg, std::uint64_t seed);
void stage_train_oracle(const ExperimentConfig& cfg, std::uint64_t seed);
void stage_distill(const ExperimentConfig& cfg, std::uint64_t seed);
void stage_evaluate(const ExperimentConfig& cfg, std::uint64_t seed);
void stage_bound_report(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunOptions {
  std::vector<std::uint64_t> seed_subset;  // empty means all config seeds
  int workers = 1;
  std::optional<std::string> format;  // overrides cfg.format
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 config, 2 runtime, 3 bound violation
  std::string message;
};

// All stages for every seed, then cross-seed aggregation into the
// benchmark table and a manifest marking completed seeds.
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Aggregated benchmark rows (model, variant, metric, mean, stderr) from
// the per-seed reports present on disk, in config seed order.
struct BenchmarkRow {
  std::string model;
  std::string variant;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_seeds = 0;
};

std::vector<BenchmarkRow> aggregate_benchmark(const ExperimentConfig& cfg,
                                              const std::vector<std::uint64_t>& seeds);

// Derived per-stage seeds, exposed so reports are reproducible piecemeal.
std::uint64_t derived_dgp_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::uint64_t derived_split_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::uint64_t derived_oracle_seed(const ExperimentConfig& cfg, std::uint64_t seed);
std::uint64_t derived_learner_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const LearnerSpec& spec);

}  // namespace ite
