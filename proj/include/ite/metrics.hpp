#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ite/dataset.hpp"
#include "ite/distill.hpp"
#include "ite/kernels.hpp"
#include "ite/oracle.hpp"
#include "ite/predictor.hpp"

namespace ite {

struct PeheResult {
  double pehe = 0.0;
  double sqrt_pehe = 0.0;
};

// Mean of (tau_hat - tau_true)^2 and its square root.
PeheResult pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau_true);

// |mean(tau_hat) - mean(tau_true)|
double ate_error(const std::vector<double>& tau_hat, const std::vector<double>& tau_true);

struct PolicyRiskResult {
  std::optional<double> risk;
  bool inestimable = false;
  std::string note;
};

// Risk of the policy "treat iff f(x,1) > f(x,0)" (ties go to control),
// estimated on a randomized subgroup with binary outcomes:
//   1 - mean(y | pi=1, T=1) P(pi=1) - mean(y | pi=0, T=0) P(pi=0).
// A term whose policy group is empty contributes zero; a term whose policy
// group is nonempty but has no units of the matching arm is inestimable
// and the result is recorded as missing.
PolicyRiskResult policy_risk_estimate(const Predictor& f, const std::vector<Unit>& rct_units);

struct AttResult {
  double att_true = 0.0;
  double att_pred = 0.0;
  double eps_att = 0.0;
};

AttResult att_and_error(const Predictor& f, const std::vector<Unit>& treated,
                        const std::vector<Unit>& randomized_controls);

struct ExpectedLosses {
  double eps_f = 0.0;
  double eps_cf = 0.0;
  double eps_f_t0 = 0.0;  // l(x,0) averaged over control-arm covariates
  double eps_f_t1 = 0.0;  // l(x,1) averaged over treated-arm covariates
};

// Pointwise expected loss l(x,t) = (f(x,t) - mu_t(x))^2 + noise_sd^2,
// exact under additive homoscedastic noise; requires synthetic ground
// truth on every unit. The mixture identity
// eps_f = P[T=1] eps_f_t1 + P[T=0] eps_f_t0 is recomputed as a self-check.
ExpectedLosses expected_losses(const Predictor& f_star, const ObservationalDataset& ds,
                               double noise_sd);

struct VarianceTerms {
  double sigma_y1_sq = 0.0;
  double sigma_y0_sq = 0.0;
  double sigma_yt_sq_p = 0.0;
  double sigma_yt_sq_ptilde = 0.0;
  double sigma_y_sq = 0.0;  // min of the two above
};

VarianceTerms variance_terms(const ObservationalDataset& ds, double noise_sd);

// Every term of the error bounds, with empirical values, Monte Carlo
// tolerances, and verdicts. pehe_lhs is the scaled left side: pehe/4 for
// the distillation bound, pehe/2 for the oracle-only bound.
struct BoundReport {
  std::string bound = "distillation";  // or "oracle"
  std::string model_label;
  double pehe = 0.0;
  double pehe_lhs = 0.0;
  double eps_rel = 0.0;
  double eps_f = 0.0;
  double eps_cf = 0.0;
  double eps_f_t0 = 0.0;
  double eps_f_t1 = 0.0;
  double sigma_y1_sq = 0.0;
  double sigma_y0_sq = 0.0;
  double sigma_yt_sq_p = 0.0;
  double sigma_yt_sq_ptilde = 0.0;
  double sigma_y_sq = 0.0;
  double ipm_hat = 0.0;
  double b_phi = 1.0;
  double rhs_first = 0.0;
  double rhs_second = 0.0;
  double tol_first = 0.0;
  double tol_second = 0.0;
  bool holds_first = false;
  bool holds_second = false;
  double appendix_intermediate = 0.0;
  double tol_appendix = 0.0;
  bool holds_appendix = false;
  std::size_t n_eval = 0;
};

//   pehe(f)/4 <= 2 eps_rel + eps_f + eps_cf - 2 sigma_y_sq            (first)
//             <= 2 eps_rel + eps_f_t0 + eps_f_t1
//                + b_phi * ipm_hat - 2 sigma_y_sq                     (second)
// with tolerances of three combined standard errors of the empirical
// means. All expectation terms are taken over ds; pairs must be the
// RCT expansion of the same units.
BoundReport verify_distillation_bound(const Predictor& f, const CfrModel& f_star,
                            const ObservationalDataset& ds, const PairSet& pairs, double b_phi,
                            const Kernel& kernel, double noise_sd,
                            const std::string& model_label = "");

//   pehe(f*)/2 <= eps_cf + eps_f - 2 sigma_y_sq                       (first)
//              <= eps_f_t1 + eps_f_t0 - 2 sigma_y_sq + b_phi*ipm_hat  (second)
BoundReport verify_oracle_bound(const CfrModel& f_star, const ObservationalDataset& ds, double b_phi,
                            const Kernel& kernel, double noise_sd);

struct EvalReport {
  std::optional<double> sqrt_pehe;
  std::optional<double> ate_error;
  std::optional<double> policy_risk;
  std::optional<double> att_error;
  std::optional<double> relative_error;
  std::size_t n_eval = 0;
};

nlohmann::json eval_report_to_json(const EvalReport& r);
nlohmann::json bound_report_to_json(const BoundReport& r);
BoundReport bound_report_from_json(const nlohmann::json& j);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Sample mean and standard error (sample sd over sqrt(n)).
MeanSe mean_se(const std::vector<double>& values);

}  // namespace ite
