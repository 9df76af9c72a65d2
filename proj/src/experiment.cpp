#include "ite/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "ite/rng.hpp"

namespace fs = std::filesystem;

namespace ite {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

void require_artifact(const std::string& path, const char* producer) {
  if (!fs::exists(path)) {
    throw std::runtime_error("missing artifact: " + path + " (produced by " + producer + ")");
  }
}

DgpConfig dgp_from_json(const nlohmann::json& j) {
  DgpConfig c;
  if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
  if (j.contains("d")) c.d = j.at("d").get<std::size_t>();
  if (j.contains("confounding_strength")) {
    c.confounding_strength = j.at("confounding_strength").get<double>();
  }
  if (j.contains("propensity_clip")) c.propensity_clip = j.at("propensity_clip").get<double>();
  if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("surface")) {
    const std::string s = j.at("surface").get<std::string>();
    if (s == "linear") {
      c.surface = Surface::linear;
    } else if (s == "exp_nonlinear") {
      c.surface = Surface::exp_nonlinear;
    } else {
      throw ConfigError("unknown surface: " + s);
    }
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json dgp_to_json(const DgpConfig& c) {
  return nlohmann::json{{"n", c.n},
                        {"d", c.d},
                        {"confounding_strength", c.confounding_strength},
                        {"propensity_clip", c.propensity_clip},
                        {"noise_sd", c.noise_sd},
                        {"surface", c.surface == Surface::linear ? "linear" : "exp_nonlinear"},
                        {"seed", c.seed}};
}

JobsLikeConfig jobs_from_json(const nlohmann::json& j) {
  JobsLikeConfig c;
  if (j.contains("n_randomized_treated")) {
    c.n_randomized_treated = j.at("n_randomized_treated").get<std::size_t>();
  }
  if (j.contains("n_randomized_control")) {
    c.n_randomized_control = j.at("n_randomized_control").get<std::size_t>();
  }
  if (j.contains("n_observational_control")) {
    c.n_observational_control = j.at("n_observational_control").get<std::size_t>();
  }
  if (j.contains("d")) c.d = j.at("d").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json jobs_to_json(const JobsLikeConfig& c) {
  return nlohmann::json{{"n_randomized_treated", c.n_randomized_treated},
                        {"n_randomized_control", c.n_randomized_control},
                        {"n_observational_control", c.n_observational_control},
                        {"d", c.d},
                        {"seed", c.seed}};
}

CsvSchema schema_from_json(const nlohmann::json& j) {
  CsvSchema s;
  if (j.contains("x_cols")) s.x_cols = j.at("x_cols").get<std::vector<std::string>>();
  if (j.contains("t_col")) s.t_col = j.at("t_col").get<std::string>();
  if (j.contains("y_col")) s.y_col = j.at("y_col").get<std::string>();
  if (j.contains("y_cf_col")) s.y_cf_col = j.at("y_cf_col").get<std::string>();
  if (j.contains("mu0_col")) s.mu0_col = j.at("mu0_col").get<std::string>();
  if (j.contains("mu1_col")) s.mu1_col = j.at("mu1_col").get<std::string>();
  if (j.contains("randomized_col")) s.randomized_col = j.at("randomized_col").get<std::string>();
  return s;
}

nlohmann::json schema_to_json(const CsvSchema& s) {
  nlohmann::json j;
  j["x_cols"] = s.x_cols;
  j["t_col"] = s.t_col;
  j["y_col"] = s.y_col;
  if (s.y_cf_col) j["y_cf_col"] = *s.y_cf_col;
  if (s.mu0_col) j["mu0_col"] = *s.mu0_col;
  if (s.mu1_col) j["mu1_col"] = *s.mu1_col;
  if (s.randomized_col) j["randomized_col"] = *s.randomized_col;
  return j;
}

TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("kernel")) c.kernel = j.at("kernel").get<Kernel>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("weight_init_scale")) {
    c.weight_init_scale = j.at("weight_init_scale").get<double>();
  }
  if (j.contains("rep_hidden")) c.rep_hidden = j.at("rep_hidden").get<std::vector<std::size_t>>();
  if (j.contains("head_hidden")) {
    c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
  }
  if (j.contains("outcome")) {
    const std::string o = j.at("outcome").get<std::string>();
    if (o == "regression") {
      c.outcome_kind = OutcomeKind::regression;
    } else if (o == "binary") {
      c.outcome_kind = OutcomeKind::binary;
    } else {
      throw ConfigError("unknown outcome kind: " + o);
    }
  }
  return c;
}

nlohmann::json train_to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"alpha", c.alpha},
      {"kernel", c.kernel},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"weight_init_scale", c.weight_init_scale},
      {"rep_hidden", c.rep_hidden},
      {"head_hidden", c.head_hidden},
      {"outcome", c.outcome_kind == OutcomeKind::binary ? "binary" : "regression"}};
}

}  // namespace

void ExperimentConfig::validate() const {
  const int sources = (dgp ? 1 : 0) + (jobs ? 1 : 0) + (csv ? 1 : 0);
  if (sources != 1) throw ConfigError("config needs exactly one data source: dgp, jobs, or csv");
  if (learners.empty()) throw ConfigError("config needs at least one learner");
  if (seeds.empty()) throw ConfigError("config needs at least one seed");
  if (output_dir.empty()) throw ConfigError("config needs an output_dir");
  if (b_phi <= 0.0) throw ConfigError("b_phi must be positive");
  if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
  if (jobs && oracle.outcome_kind != OutcomeKind::binary) {
    throw ConfigError("jobs data source requires a binary oracle outcome");
  }
  split.validate();
  oracle.validate();
  if (dgp) dgp->validate();
  if (jobs) jobs->validate();
  for (const auto& l : learners) l.validate();
}

std::optional<double> ExperimentConfig::noise_sd() const {
  if (dgp) return dgp->noise_sd;
  if (csv) return csv->noise_sd;
  return std::nullopt;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    if (j.contains("name")) cfg.name = j.at("name").get<std::string>();
    if (j.contains("dgp")) cfg.dgp = dgp_from_json(j.at("dgp"));
    if (j.contains("jobs")) cfg.jobs = jobs_from_json(j.at("jobs"));
    if (j.contains("csv")) {
      CsvSource src;
      src.path = j.at("csv").at("path").get<std::string>();
      src.schema = CsvSchema::canonical();  // matches save_dataset output
      if (j.at("csv").contains("schema")) src.schema = schema_from_json(j.at("csv").at("schema"));
      if (j.at("csv").contains("noise_sd")) {
        src.noise_sd = j.at("csv").at("noise_sd").get<double>();
      }
      cfg.csv = std::move(src);
    }
    if (j.contains("split")) {
      const auto& sj = j.at("split");
      if (sj.contains("fractions")) {
        const auto f = sj.at("fractions").get<std::vector<double>>();
        if (f.size() != 3) throw ConfigError("split.fractions must have 3 entries");
        cfg.split.train = f[0];
        cfg.split.validation = f[1];
        cfg.split.test = f[2];
      }
      if (sj.contains("seed")) cfg.split.seed = sj.at("seed").get<std::uint64_t>();
    }
    if (j.contains("oracle")) cfg.oracle = train_from_json(j.at("oracle"));
    if (j.contains("learners")) {
      cfg.learners = j.at("learners").get<std::vector<LearnerSpec>>();
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("b_phi")) cfg.b_phi = j.at("b_phi").get<double>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
    cfg.validate();
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["name"] = cfg.name;
  if (cfg.dgp) j["dgp"] = dgp_to_json(*cfg.dgp);
  if (cfg.jobs) j["jobs"] = jobs_to_json(*cfg.jobs);
  if (cfg.csv) {
    j["csv"] = {{"path", cfg.csv->path}, {"schema", schema_to_json(cfg.csv->schema)}};
    if (cfg.csv->noise_sd) j["csv"]["noise_sd"] = *cfg.csv->noise_sd;
  }
  j["split"] = {{"fractions", {cfg.split.train, cfg.split.validation, cfg.split.test}},
                {"seed", cfg.split.seed}};
  j["oracle"] = train_to_json(cfg.oracle);
  j["learners"] = cfg.learners;
  j["seeds"] = cfg.seeds;
  j["b_phi"] = cfg.b_phi;
  j["output_dir"] = cfg.output_dir;
  j["format"] = cfg.format;
  return j;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_experiment_config(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = experiment_config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : dump) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string seed_dir(const std::string& base, std::uint64_t seed) {
  return base + "/seed" + std::to_string(seed);
}

}  // namespace

std::string data_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir + "/data/seed" + std::to_string(seed) + ".csv";
}
std::string params_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir + "/data/seed" + std::to_string(seed) + ".params.json";
}
std::string oracle_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return seed_dir(cfg.output_dir + "/models", seed) + "/oracle.json";
}
std::string model_path(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& label,
                       const std::string& variant) {
  return seed_dir(cfg.output_dir + "/models", seed) + "/" + label + "__" + variant + ".json";
}
std::string eval_csv_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return seed_dir(cfg.output_dir + "/reports", seed) + "/eval.csv";
}
std::string eval_json_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return seed_dir(cfg.output_dir + "/reports", seed) + "/eval.json";
}
std::string bounds_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return seed_dir(cfg.output_dir + "/reports", seed) + "/bounds.json";
}
std::string benchmark_path(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/reports/benchmark." + cfg.format;
}
std::string manifest_path(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/manifest.json";
}

std::uint64_t derived_dgp_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::uint64_t salt = cfg.dgp ? cfg.dgp->seed : (cfg.jobs ? cfg.jobs->seed : 0);
  return mix_seed(seed, "dgp", salt);
}
std::uint64_t derived_split_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return mix_seed(seed, "split", cfg.split.seed);
}
std::uint64_t derived_oracle_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  return mix_seed(seed, "oracle", cfg.oracle.seed);
}
std::uint64_t derived_learner_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                   const LearnerSpec& spec) {
  return mix_seed(seed, "learner-" + spec.label(), spec.seed);
}

namespace {

ObservationalDataset load_stage_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string path = data_path(cfg, seed);
  require_artifact(path, "gen-data");
  return load_dataset(path, CsvSchema::canonical());
}

CfrModel load_stage_oracle(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string path = oracle_path(cfg, seed);
  require_artifact(path, "train-oracle");
  return load_cfr_model(path);
}

DataSplit split_for_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                         const ObservationalDataset& ds) {
  SplitSpec s = cfg.split;
  s.seed = derived_split_seed(cfg, seed);
  return split(ds, s);
}

struct EvalRow {
  std::string model;
  std::string variant;
  std::string metric;
  double value;
};

std::vector<EvalRow> eval_rows_for(const std::string& model, const std::string& variant,
                                   const EvalReport& r) {
  std::vector<EvalRow> rows;
  auto put = [&](const char* metric, const std::optional<double>& v) {
    if (v) rows.push_back({model, variant, metric, *v});
  };
  put("sqrt_pehe", r.sqrt_pehe);
  put("ate_error", r.ate_error);
  put("policy_risk", r.policy_risk);
  put("att_error", r.att_error);
  put("relative_error", r.relative_error);
  return rows;
}

EvalReport evaluate_model(const Predictor& model, const CfrModel& oracle, bool is_oracle,
                          const ObservationalDataset& test, const PairSet& test_pairs) {
  EvalReport r;
  r.n_eval = test.size();
  if (test.has_ground_truth()) {
    const auto tau_true = true_ite(test);
    std::vector<double> tau_hat;
    tau_hat.reserve(test.size());
    for (const auto& u : test.units) tau_hat.push_back(predicted_ite(model, u.x));
    const PeheResult p = pehe(tau_hat, tau_true);
    r.sqrt_pehe = p.sqrt_pehe;
    r.ate_error = ate_error(tau_hat, tau_true);
  }
  if (!is_oracle) {
    r.relative_error = relative_error(model, oracle, test_pairs);
  }
  if (test.has_randomized_flag()) {
    std::vector<Unit> rct, treated, controls;
    for (const auto& u : test.units) {
      if (u.randomized_flag && *u.randomized_flag) {
        rct.push_back(u);
        (u.t == 1 ? treated : controls).push_back(u);
      }
    }
    const bool binary = std::all_of(rct.begin(), rct.end(), [](const Unit& u) {
      return u.y_factual == 0.0 || u.y_factual == 1.0;
    });
    if (!rct.empty() && binary) {
      const PolicyRiskResult pr = policy_risk_estimate(model, rct);
      if (pr.risk) r.policy_risk = *pr.risk;
      if (!treated.empty() && !controls.empty()) {
        r.att_error = att_and_error(model, treated, controls).eps_att;
      }
    }
  }
  return r;
}

}  // namespace

void stage_gen_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  fs::create_directories(cfg.output_dir + "/data");
  ObservationalDataset ds;
  if (cfg.dgp) {
    DgpConfig c = *cfg.dgp;
    c.seed = derived_dgp_seed(cfg, seed);
    const DgpParams params = default_dgp_params(c);
    ds = generate_observational(c, params);
    save_dgp_params(params, params_path(cfg, seed));
  } else if (cfg.jobs) {
    JobsLikeConfig c = *cfg.jobs;
    c.seed = derived_dgp_seed(cfg, seed);
    ds = generate_jobs_like(c);
    save_jobs_params(default_jobs_params(c), params_path(cfg, seed));
  } else {
    ds = load_dataset(cfg.csv->path, cfg.csv->schema);
  }
  save_dataset(ds, data_path(cfg, seed));
}

void stage_train_oracle(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ObservationalDataset ds = load_stage_data(cfg, seed);
  const DataSplit parts = split_for_seed(cfg, seed, ds);
  TrainConfig tc = cfg.oracle;
  tc.seed = derived_oracle_seed(cfg, seed);
  const CfrModel model = train_oracle(parts.train, parts.validation, tc);
  fs::create_directories(seed_dir(cfg.output_dir + "/models", seed));
  save_cfr_model(model, oracle_path(cfg, seed));
}

void stage_distill(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ObservationalDataset ds = load_stage_data(cfg, seed);
  const DataSplit parts = split_for_seed(cfg, seed, ds);
  const CfrModel oracle = load_stage_oracle(cfg, seed);
  fs::create_directories(seed_dir(cfg.output_dir + "/models", seed));
  for (const auto& spec : cfg.learners) {
    LearnerSpec eff = spec;
    eff.seed = derived_learner_seed(cfg, seed, spec);
    const InterpretableModel ours = distill(parts.train, oracle, eff);
    save_model(ours, model_path(cfg, seed, spec.label(), "ours"));
    const InterpretableModel baseline = fit_baseline(parts.train, eff);
    save_model(baseline, model_path(cfg, seed, spec.label(), "baseline"));
  }
}

void stage_evaluate(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ObservationalDataset ds = load_stage_data(cfg, seed);
  const DataSplit parts = split_for_seed(cfg, seed, ds);
  const CfrModel oracle = load_stage_oracle(cfg, seed);
  const PairSet test_pairs = build_rct_pairs(parts.test);

  std::vector<EvalRow> rows;
  nlohmann::json jreports = nlohmann::json::array();
  auto add = [&](const std::string& model_label, const std::string& variant,
                 const EvalReport& r) {
    for (auto& row : eval_rows_for(model_label, variant, r)) rows.push_back(std::move(row));
    nlohmann::json jr = eval_report_to_json(r);
    jr["model"] = model_label;
    jr["variant"] = variant;
    jreports.push_back(std::move(jr));
  };

  add("oracle", "oracle", evaluate_model(oracle, oracle, true, parts.test, test_pairs));
  for (const auto& spec : cfg.learners) {
    for (const std::string variant : {"ours", "baseline"}) {
      const std::string path = model_path(cfg, seed, spec.label(), variant);
      require_artifact(path, "distill");
      const InterpretableModel model = load_model(path);
      add(spec.label(), variant, evaluate_model(model, oracle, false, parts.test, test_pairs));
    }
  }

  fs::create_directories(seed_dir(cfg.output_dir + "/reports", seed));
  std::ostringstream csv;
  csv << "model,variant,metric,value\n";
  for (const auto& row : rows) {
    csv << row.model << "," << row.variant << "," << row.metric << "," << fmt17(row.value)
        << "\n";
  }
  write_text(eval_csv_path(cfg, seed), csv.str());
  write_text(eval_json_path(cfg, seed), jreports.dump(2) + "\n");
}

void stage_bound_report(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ObservationalDataset ds = load_stage_data(cfg, seed);
  fs::create_directories(seed_dir(cfg.output_dir + "/reports", seed));

  nlohmann::json out = nlohmann::json::array();
  const auto noise = cfg.noise_sd();
  if (noise && ds.has_ground_truth()) {
    const DataSplit parts = split_for_seed(cfg, seed, ds);
    const CfrModel oracle = load_stage_oracle(cfg, seed);
    const PairSet test_pairs = build_rct_pairs(parts.test);

    out.push_back(bound_report_to_json(
        verify_oracle_bound(oracle, parts.test, cfg.b_phi, cfg.oracle.kernel, *noise)));
    for (const auto& spec : cfg.learners) {
      for (const std::string variant : {"ours", "baseline"}) {
        const std::string path = model_path(cfg, seed, spec.label(), variant);
        require_artifact(path, "distill");
        const InterpretableModel model = load_model(path);
        BoundReport r = verify_distillation_bound(model, oracle, parts.test, test_pairs, cfg.b_phi,
                                        cfg.oracle.kernel, *noise,
                                        spec.label() + "__" + variant);
        out.push_back(bound_report_to_json(r));
      }
    }
  }
  write_text(bounds_path(cfg, seed), out.dump(2) + "\n");
}

std::vector<BenchmarkRow> aggregate_benchmark(const ExperimentConfig& cfg,
                                              const std::vector<std::uint64_t>& seeds) {
  // key order follows first encounter, which is deterministic because the
  // per-seed reports are
  std::vector<std::string> key_order;
  std::map<std::string, std::vector<double>> values;

  for (std::uint64_t seed : seeds) {
    const std::string path = eval_csv_path(cfg, seed);
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string model, variant, metric, value;
      std::getline(ss, model, ',');
      std::getline(ss, variant, ',');
      std::getline(ss, metric, ',');
      std::getline(ss, value, ',');
      const std::string key = model + "," + variant + "," + metric;
      if (values.find(key) == values.end()) key_order.push_back(key);
      values[key].push_back(std::stod(value));
    }
  }

  std::vector<BenchmarkRow> rows;
  for (const auto& key : key_order) {
    const auto& v = values[key];
    const MeanSe ms = mean_se(v);
    std::stringstream ss(key);
    BenchmarkRow row;
    std::getline(ss, row.model, ',');
    std::getline(ss, row.variant, ',');
    std::getline(ss, row.metric, ',');
    row.mean = ms.mean;
    row.stderr_ = ms.se;
    row.n_seeds = v.size();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

void write_benchmark(const ExperimentConfig& cfg, const std::vector<BenchmarkRow>& rows) {
  if (cfg.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
      j.push_back({{"model", r.model},
                   {"variant", r.variant},
                   {"metric", r.metric},
                   {"mean", r.mean},
                   {"stderr", r.stderr_},
                   {"n_seeds", r.n_seeds}});
    }
    write_text(benchmark_path(cfg), j.dump(2) + "\n");
    return;
  }
  std::ostringstream csv;
  csv << "model,variant,metric,mean,stderr\n";
  for (const auto& r : rows) {
    csv << r.model << "," << r.variant << "," << r.metric << "," << fmt17(r.mean) << ","
        << fmt17(r.stderr_) << "\n";
  }
  write_text(benchmark_path(cfg), csv.str());
}

struct SeedStatus {
  bool completed = false;
  std::string error;
};

void run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  stage_gen_data(cfg, seed);
  stage_train_oracle(cfg, seed);
  stage_distill(cfg, seed);
  stage_evaluate(cfg, seed);
  stage_bound_report(cfg, seed);
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opts) {
  ExperimentConfig cfg = cfg_in;
  if (opts.format) cfg.format = *opts.format;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    return {1, e.what()};
  }

  std::vector<std::uint64_t> seeds;
  if (opts.seed_subset.empty()) {
    seeds = cfg.seeds;
  } else {
    for (std::uint64_t s : cfg.seeds) {
      if (std::find(opts.seed_subset.begin(), opts.seed_subset.end(), s) !=
          opts.seed_subset.end()) {
        seeds.push_back(s);
      }
    }
    if (seeds.empty()) return {1, "seed subset matches no config seed"};
  }

  fs::create_directories(cfg.output_dir + "/data");
  fs::create_directories(cfg.output_dir + "/models");
  fs::create_directories(cfg.output_dir + "/reports");

  std::vector<SeedStatus> status(seeds.size());
  const int workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(seeds.size())));
  auto work = [&](int offset) {
    for (std::size_t i = offset; i < seeds.size(); i += workers) {
      try {
        run_seed(cfg, seeds[i]);
        status[i].completed = true;
      } catch (const std::exception& e) {
        status[i].error = e.what();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  std::vector<std::uint64_t> completed;
  std::string first_error;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (status[i].completed) {
      completed.push_back(seeds[i]);
    } else if (first_error.empty()) {
      first_error = "seed " + std::to_string(seeds[i]) + ": " + status[i].error;
    }
  }

  const std::vector<BenchmarkRow> rows = aggregate_benchmark(cfg, completed);
  write_benchmark(cfg, rows);

  // bound verdicts over completed seeds
  std::size_t violations = 0;
  for (std::uint64_t seed : completed) {
    const std::string path = bounds_path(cfg, seed);
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    const nlohmann::json reports = nlohmann::json::parse(in);
    for (const auto& jr : reports) {
      if (!jr.at("holds_first").get<bool>()) ++violations;
    }
  }

  nlohmann::json manifest;
  manifest["name"] = cfg.name;
  manifest["config_hash"] = config_hash(cfg);
  manifest["seeds"] = seeds;
  manifest["completed_seeds"] = completed;
  manifest["bound_violations"] = violations;
  nlohmann::json artifacts = nlohmann::json::array();
  artifacts.push_back(benchmark_path(cfg));
  for (std::uint64_t seed : completed) {
    artifacts.push_back(data_path(cfg, seed));
    artifacts.push_back(oracle_path(cfg, seed));
    artifacts.push_back(eval_csv_path(cfg, seed));
    artifacts.push_back(eval_json_path(cfg, seed));
    artifacts.push_back(bounds_path(cfg, seed));
  }
  manifest["artifacts"] = artifacts;
  if (!first_error.empty()) manifest["first_error"] = first_error;
  write_text(manifest_path(cfg), manifest.dump(2) + "\n");

  if (!first_error.empty()) return {2, first_error};
  if (violations > 0) {
    return {3, std::to_string(violations) + " bound verification(s) failed"};
  }
  return {0, "ok"};
}

}  // namespace ite
