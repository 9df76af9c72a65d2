#include <cstdio>
#include <fstream>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ite/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::string token;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!token.empty()) seeds.push_back(std::stoull(token));
      token.clear();
    } else {
      token += c;
    }
  }
  return seeds;
}

std::vector<std::uint64_t> select_seeds(const ite::ExperimentConfig& cfg,
                                        const std::string& subset) {
  if (subset.empty()) return cfg.seeds;
  const auto wanted = parse_seed_list(subset);
  std::vector<std::uint64_t> out;
  for (std::uint64_t s : cfg.seeds) {
    for (std::uint64_t w : wanted) {
      if (s == w) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

int run_stage(const std::string& config_path, const std::string& subset,
              void (*stage)(const ite::ExperimentConfig&, std::uint64_t)) {
  ite::ExperimentConfig cfg;
  try {
    cfg = ite::load_experiment_config(config_path);
  } catch (const ite::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  }
  const auto seeds = select_seeds(cfg, subset);
  if (seeds.empty()) {
    std::fprintf(stderr, "config error: seed subset matches no config seed\n");
    return 1;
  }
  try {
    for (std::uint64_t s : seeds) stage(cfg, s);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"individual-treatment-effect distillation benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seed_subset;
  int workers = 1;
  std::string format;

  auto add_common = [&](CLI::App* sub, bool with_workers) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed-subset", seed_subset, "comma-separated seeds to run");
    if (with_workers) {
      sub->add_option("--workers", workers, "parallel seed workers");
      sub->add_option("--format", format, "benchmark output format (csv or json)");
    }
  };

  CLI::App* cmd_run = app.add_subcommand("run", "full pipeline plus aggregation");
  add_common(cmd_run, true);
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "generate or ingest per-seed datasets");
  add_common(cmd_gen, false);
  CLI::App* cmd_oracle = app.add_subcommand("train-oracle", "train the oracle per seed");
  add_common(cmd_oracle, false);
  CLI::App* cmd_distill =
      app.add_subcommand("distill", "fit distilled and baseline learners per seed");
  add_common(cmd_distill, false);
  CLI::App* cmd_eval = app.add_subcommand("evaluate", "compute evaluation metrics per seed");
  add_common(cmd_eval, false);
  CLI::App* cmd_bound = app.add_subcommand("bound-report", "verify error bounds per seed");
  add_common(cmd_bound, false);

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(cmd_run)) {
    ite::ExperimentConfig cfg;
    try {
      cfg = ite::load_experiment_config(config_path);
    } catch (const ite::ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 1;
    }
    ite::RunOptions opts;
    opts.seed_subset = parse_seed_list(seed_subset);
    opts.workers = workers;
    if (!format.empty()) opts.format = format;
    const ite::RunOutcome outcome = ite::run_experiment(cfg, opts);
    if (outcome.exit_code != 0) {
      std::fprintf(stderr, "%s\n", outcome.message.c_str());
    } else {
      std::printf("wrote %s\n", ite::benchmark_path(cfg).c_str());
    }
    return outcome.exit_code;
  }
  if (app.got_subcommand(cmd_gen)) return run_stage(config_path, seed_subset, ite::stage_gen_data);
  if (app.got_subcommand(cmd_oracle)) {
    return run_stage(config_path, seed_subset, ite::stage_train_oracle);
  }
  if (app.got_subcommand(cmd_distill)) {
    return run_stage(config_path, seed_subset, ite::stage_distill);
  }
  if (app.got_subcommand(cmd_eval)) {
    return run_stage(config_path, seed_subset, ite::stage_evaluate);
  }
  if (app.got_subcommand(cmd_bound)) {
    int code = run_stage(config_path, seed_subset, ite::stage_bound_report);
    if (code != 0) return code;
    // surface verdicts through the exit code, as run does
    try {
      const ite::ExperimentConfig cfg = ite::load_experiment_config(config_path);
      for (std::uint64_t s : select_seeds(cfg, seed_subset)) {
        std::ifstream in(ite::bounds_path(cfg, s));
        if (!in.good()) continue;
        for (const auto& jr : nlohmann::json::parse(in)) {
          if (!jr.at("holds_first").get<bool>()) return 3;
        }
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
    return 0;
  }
  return 1;
}
