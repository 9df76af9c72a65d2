#include "ite/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "ite/rng.hpp"

namespace ite {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void normalize(std::vector<double>& v) {
  double norm = std::sqrt(dot(v, v));
  if (norm == 0.0) {
    v[0] = 1.0;
    return;
  }
  for (auto& e : v) e /= norm;
}

}  // namespace

void DgpConfig::validate() const {
  if (n < 2) throw std::invalid_argument("dgp: n must be at least 2");
  if (d < 1) throw std::invalid_argument("dgp: d must be at least 1");
  if (!(propensity_clip > 0.0 && propensity_clip <= 0.5)) {
    throw std::invalid_argument("dgp: propensity_clip must lie in (0, 0.5]");
  }
  if (noise_sd < 0.0) throw std::invalid_argument("dgp: noise_sd must be nonnegative");
  if (confounding_strength < 0.0) {
    throw std::invalid_argument("dgp: confounding_strength must be nonnegative");
  }
}

DgpParams default_dgp_params(const DgpConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, "dgp-params"));
  DgpParams p;
  p.beta0.resize(cfg.d);
  p.beta1.resize(cfg.d);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  if (cfg.surface == Surface::linear) {
    for (auto& b : p.beta0) b = rng.normal() * inv_sqrt_d;
    for (std::size_t j = 0; j < cfg.d; ++j) p.beta1[j] = p.beta0[j] + 0.5 * rng.normal() * inv_sqrt_d;
    p.c = 1.0;
    p.omega = 0.0;
    p.ate_target = p.c;  // holds exactly when beta1 == beta0; approximate otherwise
  } else {
    // Sparse positive coefficients: half the coordinates carry the signal,
    // which keeps the lognormal control surface modest and its scale stable
    // across seeds.
    const std::size_t n_active = (cfg.d + 1) / 2;
    std::vector<std::size_t> coords(cfg.d);
    for (std::size_t j = 0; j < cfg.d; ++j) coords[j] = j;
    rng.shuffle(coords);
    std::fill(p.beta0.begin(), p.beta0.end(), 0.0);
    for (std::size_t k = 0; k < n_active; ++k) p.beta0[coords[k]] = rng.uniform(0.1, 0.4);
    p.beta1 = p.beta0;
    p.c = 0.0;
    p.ate_target = 4.0;
    double sum_b = std::accumulate(p.beta0.begin(), p.beta0.end(), 0.0);
    double norm2 = dot(p.beta0, p.beta0);
    // E[exp((x+0.5).beta)] under x ~ N(0, I)
    double mean_mu0 = std::exp(0.5 * sum_b + 0.5 * norm2);
    p.omega = -p.ate_target - mean_mu0;
  }

  // Confound along the outcome gradient: selection correlated with the
  // surfaces is the regime where factual-only fitting is actually biased.
  p.w.resize(cfg.d);
  for (std::size_t j = 0; j < cfg.d; ++j) p.w[j] = p.beta0[j] + p.beta1[j];
  normalize(p.w);
  return p;
}

double propensity(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x) {
  double e = logistic(cfg.confounding_strength * dot(p.w, x));
  return std::min(std::max(e, cfg.propensity_clip), 1.0 - cfg.propensity_clip);
}

double surface_mu0(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x) {
  if (cfg.surface == Surface::linear) return dot(p.beta0, x);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] + 0.5) * p.beta0[j];
  return std::exp(s);
}

double surface_mu1(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x) {
  if (cfg.surface == Surface::linear) return dot(p.beta1, x) + p.c;
  return dot(p.beta1, x) - p.omega;
}

ObservationalDataset generate_observational(const DgpConfig& cfg) {
  return generate_observational(cfg, default_dgp_params(cfg));
}

ObservationalDataset generate_observational(const DgpConfig& cfg, const DgpParams& params) {
  cfg.validate();
  if (params.w.size() != cfg.d || params.beta0.size() != cfg.d || params.beta1.size() != cfg.d) {
    throw std::invalid_argument("dgp params dimension does not match config");
  }

  Rng rng(mix_seed(cfg.seed, "dgp-units"));
  ObservationalDataset ds;
  ds.d = cfg.d;
  ds.name = std::string("synthetic-") +
            (cfg.surface == Surface::linear ? "linear" : "exp_nonlinear");

  ds.units.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Unit u;
    u.x.resize(cfg.d);
    for (auto& xi : u.x) xi = rng.normal();
    u.t = rng.bernoulli(propensity(cfg, params, u.x));
    double mu0 = surface_mu0(cfg, params, u.x);
    double mu1 = surface_mu1(cfg, params, u.x);
    u.mu0 = mu0;
    u.mu1 = mu1;
    double mu_t = u.t == 1 ? mu1 : mu0;
    double mu_cf = u.t == 1 ? mu0 : mu1;
    u.y_factual = mu_t + cfg.noise_sd * rng.normal();
    u.y_counterfactual = mu_cf + cfg.noise_sd * rng.normal();
    ds.units.push_back(std::move(u));
  }
  return ds;
}

void save_dgp_params(const DgpParams& params, const std::string& path) {
  nlohmann::json j;
  j["w"] = params.w;
  j["beta0"] = params.beta0;
  j["beta1"] = params.beta1;
  j["c"] = params.c;
  j["omega"] = params.omega;
  j["ate_target"] = params.ate_target;
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write dgp params: " + path);
  out << j.dump(2) << "\n";
}

DgpParams load_dgp_params(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open dgp params: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  DgpParams p;
  p.w = j.at("w").get<std::vector<double>>();
  p.beta0 = j.at("beta0").get<std::vector<double>>();
  p.beta1 = j.at("beta1").get<std::vector<double>>();
  p.c = j.at("c").get<double>();
  p.omega = j.at("omega").get<double>();
  p.ate_target = j.at("ate_target").get<double>();
  return p;
}

void JobsLikeConfig::validate() const {
  if (n_randomized_treated < 1 || n_randomized_control < 1 || n_observational_control < 1) {
    throw std::invalid_argument("jobs dgp: all group counts must be at least 1");
  }
  if (d < 1) throw std::invalid_argument("jobs dgp: d must be at least 1");
}

JobsLikeParams default_jobs_params(const JobsLikeConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, "jobs-params"));
  JobsLikeParams p;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  p.slope0.resize(cfg.d);
  p.slope1.resize(cfg.d);
  for (std::size_t j = 0; j < cfg.d; ++j) {
    p.slope0[j] = rng.normal() * inv_sqrt_d;
    p.slope1[j] = p.slope0[j] + 0.3 * rng.normal() * inv_sqrt_d;
  }
  // Sizeable, mostly-positive lift on the latent scale so that the
  // always-treat policy is meaningfully better than the coin flip.
  p.intercept0 = -0.6;
  p.intercept1 = p.intercept0 + 1.4;
  p.control_shift.resize(cfg.d);
  for (auto& s : p.control_shift) s = rng.normal();
  normalize(p.control_shift);
  for (auto& s : p.control_shift) s *= 0.7;
  return p;
}

double jobs_latent(const JobsLikeParams& p, const std::vector<double>& x, int t) {
  return t == 1 ? dot(p.slope1, x) + p.intercept1 : dot(p.slope0, x) + p.intercept0;
}

ObservationalDataset generate_jobs_like(const JobsLikeConfig& cfg) {
  cfg.validate();
  JobsLikeParams params = default_jobs_params(cfg);
  Rng rng(mix_seed(cfg.seed, "jobs-units"));

  ObservationalDataset ds;
  ds.d = cfg.d;
  ds.name = "jobs-like";
  ds.units.reserve(cfg.n_randomized() + cfg.n_observational_control);

  auto make_unit = [&](bool randomized) {
    Unit u;
    u.x.resize(cfg.d);
    for (std::size_t j = 0; j < cfg.d; ++j) {
      u.x[j] = rng.normal() + (randomized ? 0.0 : params.control_shift[j]);
    }
    u.t = randomized ? rng.bernoulli(0.5) : 0;
    u.randomized_flag = randomized;
    double p0 = logistic(jobs_latent(params, u.x, 0));
    double p1 = logistic(jobs_latent(params, u.x, 1));
    u.mu0 = p0;
    u.mu1 = p1;
    u.y_factual = static_cast<double>(rng.bernoulli(u.t == 1 ? p1 : p0));
    return u;
  };

  for (std::size_t i = 0; i < cfg.n_randomized(); ++i) ds.units.push_back(make_unit(true));
  for (std::size_t i = 0; i < cfg.n_observational_control; ++i) ds.units.push_back(make_unit(false));
  return ds;
}

void save_jobs_params(const JobsLikeParams& params, const std::string& path) {
  nlohmann::json j;
  j["slope0"] = params.slope0;
  j["slope1"] = params.slope1;
  j["intercept0"] = params.intercept0;
  j["intercept1"] = params.intercept1;
  j["control_shift"] = params.control_shift;
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write jobs params: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> true_ite(const ObservationalDataset& ds) {
  std::vector<double> tau;
  tau.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Unit& u = ds.units[i];
    if (!u.mu0 || !u.mu1) {
      throw std::runtime_error("true_ite: unit " + std::to_string(i) + " lacks ground truth");
    }
    tau.push_back(*u.mu1 - *u.mu0);
  }
  return tau;
}

}  // namespace ite
