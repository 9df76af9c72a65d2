#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ite/datagen.hpp"

using namespace ite;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("no confounding means a fair coin") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.d = 5;
  cfg.confounding_strength = 0.0;
  cfg.noise_sd = 1.0;
  cfg.seed = 31;
  const DgpParams params = default_dgp_params(cfg);
  const auto ds = generate_observational(cfg, params);

  for (const auto& u : ds.units) {
    CHECK(propensity(cfg, params, u.x) == 0.5);
  }
  std::vector<double> ts, proj;
  for (const auto& u : ds.units) {
    ts.push_back(u.t);
    proj.push_back(dot(params.w, u.x));
  }
  CHECK(std::fabs(correlation(ts, proj)) < 0.02);
}

TEST_CASE("propensities stay inside the overlap clip") {
  DgpConfig cfg;
  cfg.n = 5000;
  cfg.d = 4;
  cfg.confounding_strength = 6.0;  // saturates the logistic without the clip
  cfg.propensity_clip = 0.05;
  cfg.seed = 8;
  const DgpParams params = default_dgp_params(cfg);
  const auto ds = generate_observational(cfg, params);
  double lo = 1.0, hi = 0.0;
  for (const auto& u : ds.units) {
    const double e = propensity(cfg, params, u.x);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  CHECK(lo >= 0.05);
  CHECK(hi <= 0.95);
}

TEST_CASE("noiseless outcomes equal the surfaces") {
  DgpConfig cfg;
  cfg.n = 500;
  cfg.d = 3;
  cfg.noise_sd = 0.0;
  cfg.surface = Surface::exp_nonlinear;
  cfg.seed = 5;
  const auto ds = generate_observational(cfg);
  for (const auto& u : ds.units) {
    const double mu_t = u.t == 1 ? *u.mu1 : *u.mu0;
    const double mu_cf = u.t == 1 ? *u.mu0 : *u.mu1;
    CHECK(u.y_factual == mu_t);
    CHECK(*u.y_counterfactual == mu_cf);
  }
}

TEST_CASE("homoscedastic noise variance and ignorability") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.d = 5;
  cfg.confounding_strength = 1.5;
  cfg.noise_sd = 0.7;
  cfg.seed = 77;
  const auto ds = generate_observational(cfg);

  std::vector<double> residuals, ts;
  for (const auto& u : ds.units) {
    const double mu_t = u.t == 1 ? *u.mu1 : *u.mu0;
    residuals.push_back(u.y_factual - mu_t);
    ts.push_back(u.t);
  }
  const double n = static_cast<double>(residuals.size());
  const double mean = std::accumulate(residuals.begin(), residuals.end(), 0.0) / n;
  double var = 0.0;
  for (double r : residuals) var += (r - mean) * (r - mean);
  var /= n;
  CHECK(var == doctest::Approx(cfg.noise_sd * cfg.noise_sd).epsilon(0.05));
  CHECK(std::fabs(correlation(residuals, ts)) < 0.02);
}

TEST_CASE("generation is deterministic per config") {
  DgpConfig cfg;
  cfg.n = 200;
  cfg.d = 6;
  cfg.seed = 13;
  const auto a = generate_observational(cfg);
  const auto b = generate_observational(cfg);
  const auto pa = std::filesystem::temp_directory_path() / "ite_dgp_a.csv";
  const auto pb = std::filesystem::temp_directory_path() / "ite_dgp_b.csv";
  save_dataset(a, pa.string());
  save_dataset(b, pb.string());
  CHECK(slurp(pa.string()) == slurp(pb.string()));
}

TEST_CASE("true_ite") {
  SUBCASE("direct subtraction") {
    ObservationalDataset ds;
    ds.d = 1;
    Unit u;
    u.x = {0.0};
    u.mu0 = 1.0;
    u.mu1 = 3.0;
    ds.units.push_back(u);
    CHECK(true_ite(ds) == std::vector<double>{2.0});
  }
  SUBCASE("missing ground truth throws") {
    ObservationalDataset ds;
    ds.d = 1;
    ds.units.push_back({{0.0}, 0, 0.0, {}, {}, {}, {}});
    CHECK_THROWS_AS(true_ite(ds), std::runtime_error);
  }
  SUBCASE("constant effect when the linear surfaces are parallel") {
    DgpConfig cfg;
    cfg.n = 100;
    cfg.d = 4;
    cfg.surface = Surface::linear;
    cfg.seed = 21;
    DgpParams params = default_dgp_params(cfg);
    params.beta1 = params.beta0;
    params.c = 0.7;
    const auto ds = generate_observational(cfg, params);
    for (double tau : true_ite(ds)) CHECK(tau == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("exp surface matches recomputation from the sidecar parameters") {
    DgpConfig cfg;
    cfg.n = 50;
    cfg.d = 3;
    cfg.surface = Surface::exp_nonlinear;
    cfg.seed = 4;
    const DgpParams params = default_dgp_params(cfg);
    const auto path = std::filesystem::temp_directory_path() / "ite_dgp_params.json";
    save_dgp_params(params, path.string());
    const DgpParams loaded = load_dgp_params(path.string());
    const auto ds = generate_observational(cfg, params);
    const auto tau = true_ite(ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double shifted = 0.0;
      for (std::size_t j = 0; j < ds.d; ++j) shifted += (ds.units[i].x[j] + 0.5) * loaded.beta0[j];
      const double mu0 = std::exp(shifted);
      const double mu1 = dot(loaded.beta1, ds.units[i].x) - loaded.omega;
      CHECK(tau[i] == doctest::Approx(mu1 - mu0).epsilon(1e-12));
    }
  }
}

TEST_CASE("exp surface pins the population ATE near its target") {
  DgpConfig cfg;
  cfg.n = 200000;
  cfg.d = 10;
  cfg.surface = Surface::exp_nonlinear;
  cfg.confounding_strength = 0.0;
  cfg.seed = 9;
  const DgpParams params = default_dgp_params(cfg);
  const auto ds = generate_observational(cfg, params);
  const auto tau = true_ite(ds);
  const double mean_tau =
      std::accumulate(tau.begin(), tau.end(), 0.0) / static_cast<double>(tau.size());
  // Monte Carlo check of the closed-form omega calibration
  CHECK(mean_tau == doctest::Approx(params.ate_target).epsilon(0.05));
}

TEST_CASE("jobs-like generator shapes and flags") {
  JobsLikeConfig cfg;
  cfg.n_randomized_treated = 297;
  cfg.n_randomized_control = 425;
  cfg.n_observational_control = 2490;
  cfg.d = 6;
  cfg.seed = 19;
  const auto ds = generate_jobs_like(cfg);
  CHECK(ds.size() == 3212);
  CHECK(ds.has_randomized_flag());
  CHECK(ds.outcomes_binary());
  CHECK(ds.has_ground_truth());

  std::size_t n_rand = 0, n_rand_treated = 0;
  for (const auto& u : ds.units) {
    if (*u.randomized_flag) {
      ++n_rand;
      n_rand_treated += u.t;
    } else {
      CHECK(u.t == 0);
    }
  }
  CHECK(n_rand == 722);
  const double p_hat = static_cast<double>(n_rand_treated) / static_cast<double>(n_rand);
  const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(n_rand));
  CHECK(p_hat > 0.5 - band);
  CHECK(p_hat < 0.5 + band);
}

TEST_CASE("jobs-like observational controls are covariate-shifted") {
  JobsLikeConfig cfg;
  cfg.n_randomized_treated = 400;
  cfg.n_randomized_control = 400;
  cfg.n_observational_control = 4000;
  cfg.d = 5;
  cfg.seed = 3;
  const JobsLikeParams params = default_jobs_params(cfg);
  const auto ds = generate_jobs_like(cfg);
  double proj_rand = 0.0, proj_obs = 0.0;
  std::size_t n_rand = 0, n_obs = 0;
  for (const auto& u : ds.units) {
    const double p = dot(params.control_shift, u.x);
    if (*u.randomized_flag) {
      proj_rand += p;
      ++n_rand;
    } else {
      proj_obs += p;
      ++n_obs;
    }
  }
  proj_rand /= static_cast<double>(n_rand);
  proj_obs /= static_cast<double>(n_obs);
  // shift has squared norm 0.49 along itself
  CHECK(proj_obs - proj_rand == doctest::Approx(0.49).epsilon(0.2));
}
