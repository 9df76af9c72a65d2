#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ite/dataset.hpp"

namespace ite {

enum class Surface { linear, exp_nonlinear };

// Synthetic observational DGP with known potential-outcome surfaces.
// Covariates are standard normal; treatment is confounded through a
// logistic propensity along a fixed direction w, clipped to keep overlap.
struct DgpConfig {
  std::size_t n = 1000;
  std::size_t d = 10;
  double confounding_strength = 1.0;  // gamma
  double propensity_clip = 0.05;
  double noise_sd = 1.0;
  Surface surface = Surface::linear;
  std::uint64_t seed = 0;

  void validate() const;
};

// Surface and assignment parameters. Reproducible from the config seed;
// emitted to a JSON sidecar for auditability. The exp_nonlinear surface
// shares one coefficient vector (beta0 == beta1) and pins the population
// ATE to ate_target through omega.
struct DgpParams {
  std::vector<double> w;      // unit vector, propensity direction
  std::vector<double> beta0;
  std::vector<double> beta1;
  double c = 0.0;             // treated-surface offset (linear)
  double omega = 0.0;         // treated-surface shift (exp_nonlinear)
  double ate_target = 4.0;
};

DgpParams default_dgp_params(const DgpConfig& cfg);

double propensity(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x);
double surface_mu0(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x);
double surface_mu1(const DgpConfig& cfg, const DgpParams& p, const std::vector<double>& x);

ObservationalDataset generate_observational(const DgpConfig& cfg);
ObservationalDataset generate_observational(const DgpConfig& cfg, const DgpParams& params);

void save_dgp_params(const DgpParams& params, const std::string& path);
DgpParams load_dgp_params(const std::string& path);

// Randomized-trial-plus-observational-cohort generator with binary
// outcomes through a logistic link. The randomized subgroup gets a fair
// coin independent of x; the treated/control counts size that subgroup.
// Observational controls draw covariates from a mean-shifted normal.
struct JobsLikeConfig {
  std::size_t n_randomized_treated = 297;
  std::size_t n_randomized_control = 425;
  std::size_t n_observational_control = 2490;
  std::size_t d = 8;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t n_randomized() const { return n_randomized_treated + n_randomized_control; }
};

struct JobsLikeParams {
  std::vector<double> slope0;
  std::vector<double> slope1;
  double intercept0 = 0.0;
  double intercept1 = 0.0;
  std::vector<double> control_shift;  // covariate mean of observational controls
};

JobsLikeParams default_jobs_params(const JobsLikeConfig& cfg);
double jobs_latent(const JobsLikeParams& p, const std::vector<double>& x, int t);

ObservationalDataset generate_jobs_like(const JobsLikeConfig& cfg);
void save_jobs_params(const JobsLikeParams& params, const std::string& path);

// mu1 - mu0 per unit, in row order. Throws when ground truth is missing.
std::vector<double> true_ite(const ObservationalDataset& ds);

}  // namespace ite
