#include "ite/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ite {

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("mean_se: empty sample");
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  if (n == 1) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  return out;
}

PeheResult pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau_true) {
  if (tau_hat.size() != tau_true.size()) throw std::invalid_argument("pehe: length mismatch");
  if (tau_hat.empty()) throw std::invalid_argument("pehe: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < tau_hat.size(); ++i) {
    const double d = tau_hat[i] - tau_true[i];
    s += d * d;
  }
  PeheResult out;
  out.pehe = s / static_cast<double>(tau_hat.size());
  out.sqrt_pehe = std::sqrt(out.pehe);
  return out;
}

double ate_error(const std::vector<double>& tau_hat, const std::vector<double>& tau_true) {
  if (tau_hat.size() != tau_true.size()) throw std::invalid_argument("ate_error: length mismatch");
  if (tau_hat.empty()) throw std::invalid_argument("ate_error: empty input");
  const double n = static_cast<double>(tau_hat.size());
  const double m_hat = std::accumulate(tau_hat.begin(), tau_hat.end(), 0.0) / n;
  const double m_true = std::accumulate(tau_true.begin(), tau_true.end(), 0.0) / n;
  return std::fabs(m_hat - m_true);
}

PolicyRiskResult policy_risk_estimate(const Predictor& f, const std::vector<Unit>& rct_units) {
  if (rct_units.empty()) throw std::invalid_argument("policy_risk_estimate: no randomized units");
  for (const auto& u : rct_units) {
    if (u.y_factual != 0.0 && u.y_factual != 1.0) {
      throw std::invalid_argument("policy_risk_estimate: outcomes must be binary");
    }
  }

  const double n = static_cast<double>(rct_units.size());
  double n_pi1 = 0.0;
  double sum_y_pi1_t1 = 0.0, n_pi1_t1 = 0.0;
  double sum_y_pi0_t0 = 0.0, n_pi0_t0 = 0.0;
  for (const auto& u : rct_units) {
    const int pi = f.predict(u.x, 1) > f.predict(u.x, 0) ? 1 : 0;  // tie -> control
    if (pi == 1) {
      n_pi1 += 1.0;
      if (u.t == 1) {
        sum_y_pi1_t1 += u.y_factual;
        n_pi1_t1 += 1.0;
      }
    } else if (u.t == 0) {
      sum_y_pi0_t0 += u.y_factual;
      n_pi0_t0 += 1.0;
    }
  }
  const double p1 = n_pi1 / n;
  const double p0 = 1.0 - p1;

  PolicyRiskResult out;
  double risk = 1.0;
  if (p1 > 0.0) {
    if (n_pi1_t1 == 0.0) {
      out.inestimable = true;
      out.note = "inestimable term: no treated units in the pi=1 group";
      return out;
    }
    risk -= (sum_y_pi1_t1 / n_pi1_t1) * p1;
  }
  if (p0 > 0.0) {
    if (n_pi0_t0 == 0.0) {
      out.inestimable = true;
      out.note = "inestimable term: no control units in the pi=0 group";
      return out;
    }
    risk -= (sum_y_pi0_t0 / n_pi0_t0) * p0;
  }
  out.risk = risk;
  return out;
}

AttResult att_and_error(const Predictor& f, const std::vector<Unit>& treated,
                        const std::vector<Unit>& randomized_controls) {
  if (treated.empty()) throw std::invalid_argument("att_and_error: no treated units");
  if (randomized_controls.empty()) {
    throw std::invalid_argument("att_and_error: no randomized control units");
  }
  double y_t = 0.0;
  for (const auto& u : treated) y_t += u.y_factual;
  y_t /= static_cast<double>(treated.size());
  double y_c = 0.0;
  for (const auto& u : randomized_controls) y_c += u.y_factual;
  y_c /= static_cast<double>(randomized_controls.size());

  double pred = 0.0;
  for (const auto& u : treated) pred += f.predict(u.x, 1) - f.predict(u.x, 0);
  pred /= static_cast<double>(treated.size());

  AttResult out;
  out.att_true = y_t - y_c;
  out.att_pred = pred;
  out.eps_att = std::fabs(out.att_true - out.att_pred);
  return out;
}

namespace {

// per-unit expected losses l(x,1) and l(x,0)
struct LossRows {
  std::vector<double> l_factual;   // l(x_i, t_i)
  std::vector<double> l_counter;   // l(x_i, 1-t_i)
  std::vector<double> l_t1_over_treated;
  std::vector<double> l_t0_over_control;
};

LossRows loss_rows(const Predictor& f_star, const ObservationalDataset& ds, double noise_sd) {
  if (!ds.has_ground_truth()) {
    throw std::invalid_argument("expected_losses: dataset lacks ground-truth surfaces");
  }
  LossRows rows;
  const double var = noise_sd * noise_sd;
  for (const auto& u : ds.units) {
    const double e1 = f_star.predict(u.x, 1) - *u.mu1;
    const double e0 = f_star.predict(u.x, 0) - *u.mu0;
    const double l1 = e1 * e1 + var;
    const double l0 = e0 * e0 + var;
    rows.l_factual.push_back(u.t == 1 ? l1 : l0);
    rows.l_counter.push_back(u.t == 1 ? l0 : l1);
    if (u.t == 1) {
      rows.l_t1_over_treated.push_back(l1);
    } else {
      rows.l_t0_over_control.push_back(l0);
    }
  }
  return rows;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ExpectedLosses expected_losses(const Predictor& f_star, const ObservationalDataset& ds,
                               double noise_sd) {
  if (ds.count_arm(0) == 0 || ds.count_arm(1) == 0) {
    throw std::invalid_argument("expected_losses: both treatment arms required");
  }
  const LossRows rows = loss_rows(f_star, ds, noise_sd);
  ExpectedLosses out;
  out.eps_f = mean_of(rows.l_factual);
  out.eps_cf = mean_of(rows.l_counter);
  out.eps_f_t1 = mean_of(rows.l_t1_over_treated);
  out.eps_f_t0 = mean_of(rows.l_t0_over_control);

  const double p1 = static_cast<double>(ds.count_arm(1)) / static_cast<double>(ds.size());
  const double mixed = p1 * out.eps_f_t1 + (1.0 - p1) * out.eps_f_t0;
  if (std::fabs(mixed - out.eps_f) > 1e-10 * std::max(1.0, std::fabs(out.eps_f))) {
    throw std::runtime_error("expected_losses: factual mixture identity violated");
  }
  return out;
}

VarianceTerms variance_terms(const ObservationalDataset& ds, double noise_sd) {
  if (ds.units.empty()) throw std::invalid_argument("variance_terms: empty dataset");
  if (noise_sd < 0.0) throw std::invalid_argument("variance_terms: negative noise_sd");
  const double var = noise_sd * noise_sd;
  const double p1 = static_cast<double>(ds.count_arm(1)) / static_cast<double>(ds.size());
  VarianceTerms out;
  out.sigma_y1_sq = var * p1;
  out.sigma_y0_sq = var * (1.0 - p1);
  out.sigma_yt_sq_p = out.sigma_y1_sq + out.sigma_y0_sq;
  // swapping t and 1-t swaps the arm weights but not their sum
  out.sigma_yt_sq_ptilde = var * (1.0 - p1) + var * p1;
  out.sigma_y_sq = std::min(out.sigma_yt_sq_p, out.sigma_yt_sq_ptilde);
  return out;
}

namespace {

std::vector<double> true_tau(const ObservationalDataset& ds) {
  std::vector<double> tau;
  tau.reserve(ds.size());
  for (const auto& u : ds.units) tau.push_back(*u.mu1 - *u.mu0);
  return tau;
}

std::vector<double> predicted_tau(const Predictor& f, const ObservationalDataset& ds) {
  std::vector<double> tau;
  tau.reserve(ds.size());
  for (const auto& u : ds.units) tau.push_back(predicted_ite(f, u.x));
  return tau;
}

double arm_mmd(const CfrModel& f_star, const ObservationalDataset& ds, const Kernel& kernel) {
  std::vector<std::vector<double>> rep0, rep1;
  for (const auto& u : ds.units) {
    (u.t == 1 ? rep1 : rep0).push_back(f_star.representation(u.x));
  }
  return std::sqrt(mmd_squared(rep0, rep1, kernel));
}

void check_term(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw std::runtime_error(std::string("bound verification: non-finite term ") + name);
  }
}

}  // namespace

BoundReport verify_distillation_bound(const Predictor& f, const CfrModel& f_star,
                            const ObservationalDataset& ds, const PairSet& pairs, double b_phi,
                            const Kernel& kernel, double noise_sd,
                            const std::string& model_label) {
  if (!ds.has_ground_truth()) {
    throw std::invalid_argument("verify_distillation_bound: dataset lacks ground-truth surfaces");
  }
  if (b_phi <= 0.0) throw std::invalid_argument("verify_distillation_bound: b_phi must be positive");

  BoundReport r;
  r.bound = "distillation";
  r.model_label = model_label;
  r.b_phi = b_phi;
  r.n_eval = ds.size();

  // per-unit samples, so tolerances can be combined standard errors
  std::vector<double> pehe_rows;
  {
    const auto tau_t = true_tau(ds);
    const auto tau_h = predicted_tau(f, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double d = tau_h[i] - tau_t[i];
      pehe_rows.push_back(d * d);
    }
  }
  std::vector<double> rel_rows;
  for (const auto& p : pairs.pairs) {
    const double d = f.predict(p.x, p.t) - f_star.predict(p.x, p.t);
    rel_rows.push_back(d * d);
  }

  const MeanSe pehe_ms = mean_se(pehe_rows);
  const MeanSe rel_ms = mean_se(rel_rows);
  const LossRows lrows = loss_rows(f_star, ds, noise_sd);
  const MeanSe f_ms = mean_se(lrows.l_factual);
  const MeanSe cf_ms = mean_se(lrows.l_counter);
  const MeanSe t1_ms = mean_se(lrows.l_t1_over_treated);
  const MeanSe t0_ms = mean_se(lrows.l_t0_over_control);
  const VarianceTerms vt = variance_terms(ds, noise_sd);

  r.pehe = pehe_ms.mean;
  r.pehe_lhs = pehe_ms.mean / 4.0;
  r.eps_rel = rel_ms.mean;
  r.eps_f = f_ms.mean;
  r.eps_cf = cf_ms.mean;
  r.eps_f_t0 = t0_ms.mean;
  r.eps_f_t1 = t1_ms.mean;
  r.sigma_y1_sq = vt.sigma_y1_sq;
  r.sigma_y0_sq = vt.sigma_y0_sq;
  r.sigma_yt_sq_p = vt.sigma_yt_sq_p;
  r.sigma_yt_sq_ptilde = vt.sigma_yt_sq_ptilde;
  r.sigma_y_sq = vt.sigma_y_sq;
  r.ipm_hat = arm_mmd(f_star, ds, kernel);

  r.rhs_first = 2.0 * r.eps_rel + r.eps_f + r.eps_cf - 2.0 * r.sigma_y_sq;
  r.rhs_second = 2.0 * r.eps_rel + r.eps_f_t0 + r.eps_f_t1 + b_phi * r.ipm_hat -
                 2.0 * r.sigma_y_sq;
  r.tol_first = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se / 16.0 + 4.0 * rel_ms.se * rel_ms.se +
                                f_ms.se * f_ms.se + cf_ms.se * cf_ms.se);
  r.tol_second = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se / 16.0 + 4.0 * rel_ms.se * rel_ms.se +
                                 t0_ms.se * t0_ms.se + t1_ms.se * t1_ms.se);
  r.holds_first = r.pehe_lhs <= r.rhs_first + r.tol_first;
  r.holds_second = r.pehe_lhs <= r.rhs_second + r.tol_second;

  r.appendix_intermediate = 8.0 * r.eps_rel + 4.0 * (r.eps_f - r.sigma_yt_sq_p) +
                            4.0 * (r.eps_cf - r.sigma_yt_sq_ptilde);
  r.tol_appendix = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se + 64.0 * rel_ms.se * rel_ms.se +
                                   16.0 * f_ms.se * f_ms.se + 16.0 * cf_ms.se * cf_ms.se);
  r.holds_appendix = r.appendix_intermediate >= r.pehe - r.tol_appendix;

  check_term(r.pehe_lhs, "pehe_lhs");
  check_term(r.eps_rel, "eps_rel");
  check_term(r.eps_f, "eps_f");
  check_term(r.eps_cf, "eps_cf");
  check_term(r.ipm_hat, "ipm_hat");
  check_term(r.rhs_first, "rhs_first");
  check_term(r.rhs_second, "rhs_second");
  return r;
}

BoundReport verify_oracle_bound(const CfrModel& f_star, const ObservationalDataset& ds, double b_phi,
                            const Kernel& kernel, double noise_sd) {
  if (!ds.has_ground_truth()) {
    throw std::invalid_argument("verify_oracle_bound: dataset lacks ground-truth surfaces");
  }
  if (b_phi <= 0.0) throw std::invalid_argument("verify_oracle_bound: b_phi must be positive");

  BoundReport r;
  r.bound = "oracle";
  r.model_label = "oracle";
  r.b_phi = b_phi;
  r.n_eval = ds.size();

  std::vector<double> pehe_rows;
  {
    const auto tau_t = true_tau(ds);
    const auto tau_h = predicted_tau(f_star, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double d = tau_h[i] - tau_t[i];
      pehe_rows.push_back(d * d);
    }
  }
  const MeanSe pehe_ms = mean_se(pehe_rows);
  const LossRows lrows = loss_rows(f_star, ds, noise_sd);
  const MeanSe f_ms = mean_se(lrows.l_factual);
  const MeanSe cf_ms = mean_se(lrows.l_counter);
  const MeanSe t1_ms = mean_se(lrows.l_t1_over_treated);
  const MeanSe t0_ms = mean_se(lrows.l_t0_over_control);
  const VarianceTerms vt = variance_terms(ds, noise_sd);

  r.pehe = pehe_ms.mean;
  r.pehe_lhs = pehe_ms.mean / 2.0;
  r.eps_rel = 0.0;
  r.eps_f = f_ms.mean;
  r.eps_cf = cf_ms.mean;
  r.eps_f_t0 = t0_ms.mean;
  r.eps_f_t1 = t1_ms.mean;
  r.sigma_y1_sq = vt.sigma_y1_sq;
  r.sigma_y0_sq = vt.sigma_y0_sq;
  r.sigma_yt_sq_p = vt.sigma_yt_sq_p;
  r.sigma_yt_sq_ptilde = vt.sigma_yt_sq_ptilde;
  r.sigma_y_sq = vt.sigma_y_sq;
  r.ipm_hat = arm_mmd(f_star, ds, kernel);

  r.rhs_first = r.eps_cf + r.eps_f - 2.0 * r.sigma_y_sq;
  r.rhs_second = r.eps_f_t1 + r.eps_f_t0 - 2.0 * r.sigma_y_sq + b_phi * r.ipm_hat;
  r.tol_first = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se / 4.0 + f_ms.se * f_ms.se +
                                cf_ms.se * cf_ms.se);
  r.tol_second = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se / 4.0 + t0_ms.se * t0_ms.se +
                                 t1_ms.se * t1_ms.se);
  r.holds_first = r.pehe_lhs <= r.rhs_first + r.tol_first;
  r.holds_second = r.pehe_lhs <= r.rhs_second + r.tol_second;

  r.appendix_intermediate = 4.0 * (r.eps_f - r.sigma_yt_sq_p) +
                            4.0 * (r.eps_cf - r.sigma_yt_sq_ptilde);
  r.tol_appendix = 3.0 * std::sqrt(pehe_ms.se * pehe_ms.se + 16.0 * f_ms.se * f_ms.se +
                                   16.0 * cf_ms.se * cf_ms.se);
  // the oracle-only chain gives pehe <= 2 eps_f + 2 eps_cf - 2 (var sums)
  r.holds_appendix = r.appendix_intermediate / 2.0 >= r.pehe - r.tol_appendix;

  check_term(r.pehe_lhs, "pehe_lhs");
  check_term(r.eps_f, "eps_f");
  check_term(r.eps_cf, "eps_cf");
  check_term(r.ipm_hat, "ipm_hat");
  check_term(r.rhs_first, "rhs_first");
  check_term(r.rhs_second, "rhs_second");
  return r;
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json j;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("sqrt_pehe", r.sqrt_pehe);
  put("ate_error", r.ate_error);
  put("policy_risk", r.policy_risk);
  put("att_error", r.att_error);
  put("relative_error", r.relative_error);
  j["n_eval"] = r.n_eval;
  return j;
}

nlohmann::json bound_report_to_json(const BoundReport& r) {
  return nlohmann::json{{"bound", r.bound},
                        {"model", r.model_label},
                        {"pehe", r.pehe},
                        {"pehe_lhs", r.pehe_lhs},
                        {"eps_rel", r.eps_rel},
                        {"eps_f", r.eps_f},
                        {"eps_cf", r.eps_cf},
                        {"eps_f_t0", r.eps_f_t0},
                        {"eps_f_t1", r.eps_f_t1},
                        {"sigma_y1_sq", r.sigma_y1_sq},
                        {"sigma_y0_sq", r.sigma_y0_sq},
                        {"sigma_yt_sq_p", r.sigma_yt_sq_p},
                        {"sigma_yt_sq_ptilde", r.sigma_yt_sq_ptilde},
                        {"sigma_y_sq", r.sigma_y_sq},
                        {"ipm_hat", r.ipm_hat},
                        {"b_phi", r.b_phi},
                        {"rhs_first", r.rhs_first},
                        {"rhs_second", r.rhs_second},
                        {"tol_first", r.tol_first},
                        {"tol_second", r.tol_second},
                        {"holds_first", r.holds_first},
                        {"holds_second", r.holds_second},
                        {"appendix_intermediate", r.appendix_intermediate},
                        {"tol_appendix", r.tol_appendix},
                        {"holds_appendix", r.holds_appendix},
                        {"n_eval", r.n_eval}};
}

BoundReport bound_report_from_json(const nlohmann::json& j) {
  BoundReport r;
  r.bound = j.at("bound").get<std::string>();
  r.model_label = j.at("model").get<std::string>();
  r.pehe = j.at("pehe").get<double>();
  r.pehe_lhs = j.at("pehe_lhs").get<double>();
  r.eps_rel = j.at("eps_rel").get<double>();
  r.eps_f = j.at("eps_f").get<double>();
  r.eps_cf = j.at("eps_cf").get<double>();
  r.eps_f_t0 = j.at("eps_f_t0").get<double>();
  r.eps_f_t1 = j.at("eps_f_t1").get<double>();
  r.sigma_y1_sq = j.at("sigma_y1_sq").get<double>();
  r.sigma_y0_sq = j.at("sigma_y0_sq").get<double>();
  r.sigma_yt_sq_p = j.at("sigma_yt_sq_p").get<double>();
  r.sigma_yt_sq_ptilde = j.at("sigma_yt_sq_ptilde").get<double>();
  r.sigma_y_sq = j.at("sigma_y_sq").get<double>();
  r.ipm_hat = j.at("ipm_hat").get<double>();
  r.b_phi = j.at("b_phi").get<double>();
  r.rhs_first = j.at("rhs_first").get<double>();
  r.rhs_second = j.at("rhs_second").get<double>();
  r.tol_first = j.at("tol_first").get<double>();
  r.tol_second = j.at("tol_second").get<double>();
  r.holds_first = j.at("holds_first").get<bool>();
  r.holds_second = j.at("holds_second").get<bool>();
  r.appendix_intermediate = j.at("appendix_intermediate").get<double>();
  r.tol_appendix = j.at("tol_appendix").get<double>();
  r.holds_appendix = j.at("holds_appendix").get<bool>();
  r.n_eval = j.at("n_eval").get<std::size_t>();
  return r;
}

}  // namespace ite
