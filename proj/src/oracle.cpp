#include "ite/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "ite/rng.hpp"

namespace ite {

namespace {

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_deriv(double z) { return z > 0.0 ? 1.0 : std::exp(z); }
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Trace {
  // activations[0] is the input; activations[l+1] = act(pre[l])
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> pre;
};

Trace mlp_trace(const Mlp& m, const std::vector<double>& input) {
  Trace tr;
  tr.activations.reserve(m.n_layers() + 1);
  tr.pre.reserve(m.n_layers());
  tr.activations.push_back(input);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t in = m.widths[l];
    const std::size_t out = m.widths[l + 1];
    const auto& a = tr.activations.back();
    std::vector<double> z(out);
    for (std::size_t i = 0; i < out; ++i) {
      double s = m.biases[l][i];
      const double* w = m.weights[l].data() + i * in;
      for (std::size_t j = 0; j < in; ++j) s += w[j] * a[j];
      z[i] = s;
    }
    const bool activate = m.elu_output || l + 1 < m.n_layers();
    std::vector<double> act(out);
    for (std::size_t i = 0; i < out; ++i) act[i] = activate ? elu(z[i]) : z[i];
    tr.pre.push_back(std::move(z));
    tr.activations.push_back(std::move(act));
  }
  return tr;
}

// Accumulates parameter gradients for d_loss/d_output and returns
// d_loss/d_input.
std::vector<double> mlp_backward(const Mlp& m, const Trace& tr, std::vector<double> d_out,
                                 MlpGrad& grad) {
  for (std::size_t lp = m.n_layers(); lp-- > 0;) {
    const std::size_t in = m.widths[lp];
    const std::size_t out = m.widths[lp + 1];
    const bool activate = m.elu_output || lp + 1 < m.n_layers();
    std::vector<double> dz(out);
    for (std::size_t i = 0; i < out; ++i) {
      dz[i] = activate ? d_out[i] * elu_deriv(tr.pre[lp][i]) : d_out[i];
    }
    const auto& a_prev = tr.activations[lp];
    std::vector<double> d_prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      double* gw = grad.weights[lp].data() + i * in;
      const double* w = m.weights[lp].data() + i * in;
      for (std::size_t j = 0; j < in; ++j) {
        gw[j] += dz[i] * a_prev[j];
        d_prev[j] += dz[i] * w[j];
      }
      grad.biases[lp][i] += dz[i];
    }
    d_out = std::move(d_prev);
  }
  return d_out;
}

MlpGrad zero_grad(const Mlp& m) {
  MlpGrad g;
  g.weights.resize(m.n_layers());
  g.biases.resize(m.n_layers());
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    g.weights[l].assign(m.weights[l].size(), 0.0);
    g.biases[l].assign(m.biases[l].size(), 0.0);
  }
  return g;
}

void check_finite_layer(const std::vector<double>& v, std::size_t layer, const char* net) {
  for (double e : v) {
    if (!std::isfinite(e)) {
      throw std::runtime_error(std::string("non-finite value in ") + net + " layer " +
                               std::to_string(layer));
    }
  }
}

// Unclamped V-statistic; mmd_squared clamps the result.
double mmd_squared_raw(const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b, const Kernel& kernel) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mmd_squared: empty sample");
  const std::size_t dim = a.front().size();
  for (const auto& v : a) {
    if (v.size() != dim) throw std::invalid_argument("mmd_squared: dimension mismatch");
  }
  for (const auto& v : b) {
    if (v.size() != dim) throw std::invalid_argument("mmd_squared: dimension mismatch");
  }
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (const auto& u : a)
    for (const auto& v : a) kaa += kernel(u, v);
  for (const auto& u : b)
    for (const auto& v : b) kbb += kernel(u, v);
  for (const auto& u : a)
    for (const auto& v : b) kab += kernel(u, v);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return kaa / (na * na) + kbb / (nb * nb) - 2.0 * kab / (na * nb);
}

// d k(u, v) / d u
std::vector<double> kernel_grad_first(const Kernel& kernel, const std::vector<double>& u,
                                      const std::vector<double>& v) {
  std::vector<double> g(u.size());
  if (kernel.kind == Kernel::Kind::linear) {
    g = v;
    return g;
  }
  const double k = kernel(u, v);
  const double inv_bw2 = 1.0 / (kernel.bandwidth * kernel.bandwidth);
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = k * (v[i] - u[i]) * inv_bw2;
  return g;
}

double batch_treated_fraction(const std::vector<Triple>& batch) {
  double s = 0.0;
  for (const auto& tr : batch) s += tr.t;
  return s / static_cast<double>(batch.size());
}

double unit_weight(int t, double u) {
  return t == 1 ? 1.0 / (2.0 * u) : 1.0 / (2.0 * (1.0 - u));
}

constexpr double kMmdEps = 1e-12;
constexpr double kProbClamp = 1e-12;

double point_loss(OutcomeKind kind, double raw_output, double y) {
  if (kind == OutcomeKind::regression) {
    const double r = raw_output - y;
    return r * r;
  }
  double p = logistic(raw_output);
  p = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace

Mlp Mlp::zeros(const std::vector<std::size_t>& widths, bool elu_output) {
  if (widths.empty()) throw std::invalid_argument("mlp needs at least an input width");
  Mlp m;
  m.widths = widths;
  m.elu_output = elu_output;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    m.weights.emplace_back(widths[l] * widths[l + 1], 0.0);
    m.biases.emplace_back(widths[l + 1], 0.0);
  }
  return m;
}

std::vector<double> CfrModel::representation(const std::vector<double>& x) const {
  if (x.size() != phi.net.in_dim()) {
    throw std::invalid_argument("representation: covariate dimension mismatch");
  }
  Trace tr = mlp_trace(phi.net, x);
  for (std::size_t l = 0; l < phi.net.n_layers(); ++l) {
    check_finite_layer(tr.activations[l + 1], l, "representation");
  }
  return tr.activations.back();
}

double CfrModel::predict(const std::vector<double>& x, int t) const {
  return ite::forward(*this, x, t);
}

double mmd_squared(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b, const Kernel& kernel) {
  const double raw = mmd_squared_raw(a, b, kernel);
  return raw > 0.0 ? raw : 0.0;
}

double forward(const CfrModel& model, const std::vector<double>& x, int t) {
  std::vector<double> r = model.representation(x);
  const Mlp& head = t == 1 ? model.heads.h1 : model.heads.h0;
  Trace tr = mlp_trace(head, r);
  for (std::size_t l = 0; l < head.n_layers(); ++l) {
    check_finite_layer(tr.activations[l + 1], l, t == 1 ? "head1" : "head0");
  }
  const double z = tr.activations.back().at(0);
  return model.outcome_kind == OutcomeKind::binary ? logistic(z) : z;
}

double cfr_objective(const CfrModel& model, const std::vector<Triple>& batch,
                     const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("cfr_objective: empty batch");
  const double u = batch_treated_fraction(batch);
  if (cfg.alpha > 0.0 && (u == 0.0 || u == 1.0)) {
    throw std::invalid_argument("cfr_objective: single-arm batch with alpha > 0");
  }

  double loss_sum = 0.0;
  std::vector<std::vector<double>> rep0, rep1;
  for (const auto& unit : batch) {
    Trace tr_phi = mlp_trace(model.phi.net, unit.x);
    const auto& r = tr_phi.activations.back();
    const Mlp& head = unit.t == 1 ? model.heads.h1 : model.heads.h0;
    Trace tr_head = mlp_trace(head, r);
    const double out = tr_head.activations.back().at(0);
    loss_sum += unit_weight(unit.t, u) * point_loss(model.outcome_kind, out, unit.y);
    if (cfg.alpha > 0.0) (unit.t == 1 ? rep1 : rep0).push_back(r);
  }
  double obj = loss_sum / static_cast<double>(batch.size());
  if (cfg.alpha > 0.0) {
    obj += cfg.alpha * std::sqrt(mmd_squared(rep0, rep1, cfg.kernel) + kMmdEps);
  }
  return obj;
}

CfrGradient gradient(const CfrModel& model, const std::vector<Triple>& batch,
                     const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  const double u = batch_treated_fraction(batch);
  if (cfg.alpha > 0.0 && (u == 0.0 || u == 1.0)) {
    throw std::invalid_argument("gradient: single-arm batch with alpha > 0");
  }
  const double m = static_cast<double>(batch.size());

  CfrGradient grad;
  grad.phi = zero_grad(model.phi.net);
  grad.h0 = zero_grad(model.heads.h0);
  grad.h1 = zero_grad(model.heads.h1);

  std::vector<Trace> phi_traces;
  phi_traces.reserve(batch.size());
  std::vector<std::vector<double>> d_rep(batch.size());
  std::vector<std::size_t> arm0, arm1;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& unit = batch[i];
    phi_traces.push_back(mlp_trace(model.phi.net, unit.x));
    const auto& r = phi_traces.back().activations.back();
    const Mlp& head = unit.t == 1 ? model.heads.h1 : model.heads.h0;
    Trace tr_head = mlp_trace(head, r);
    const double out = tr_head.activations.back().at(0);

    double d_out;
    if (model.outcome_kind == OutcomeKind::regression) {
      d_out = 2.0 * (out - unit.y);
    } else {
      d_out = logistic(out) - unit.y;  // cross-entropy through the logit
    }
    d_out *= unit_weight(unit.t, u) / m;
    d_rep[i] = mlp_backward(head, tr_head, {d_out}, unit.t == 1 ? grad.h1 : grad.h0);
    (unit.t == 1 ? arm1 : arm0).push_back(i);
  }

  if (cfg.alpha > 0.0) {
    const auto& reps = [&] {
      std::vector<std::vector<double>> r(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) r[i] = phi_traces[i].activations.back();
      return r;
    }();
    std::vector<std::vector<double>> rep0, rep1;
    for (auto i : arm0) rep0.push_back(reps[i]);
    for (auto i : arm1) rep1.push_back(reps[i]);
    const double raw = mmd_squared_raw(rep0, rep1, cfg.kernel);
    if (raw > 0.0) {
      const double scale = cfg.alpha / (2.0 * std::sqrt(raw + kMmdEps));
      const double n0 = static_cast<double>(arm0.size());
      const double n1 = static_cast<double>(arm1.size());
      auto add_scaled = [](std::vector<double>& dst, const std::vector<double>& src, double s) {
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
      };
      for (auto i : arm0) {
        for (auto j : arm0) add_scaled(d_rep[i], kernel_grad_first(cfg.kernel, reps[i], reps[j]),
                                       scale * 2.0 / (n0 * n0));
        for (auto j : arm1) add_scaled(d_rep[i], kernel_grad_first(cfg.kernel, reps[i], reps[j]),
                                       -scale * 2.0 / (n0 * n1));
      }
      for (auto i : arm1) {
        for (auto j : arm1) add_scaled(d_rep[i], kernel_grad_first(cfg.kernel, reps[i], reps[j]),
                                       scale * 2.0 / (n1 * n1));
        for (auto j : arm0) add_scaled(d_rep[i], kernel_grad_first(cfg.kernel, reps[i], reps[j]),
                                       -scale * 2.0 / (n0 * n1));
      }
    }
  }

  for (std::size_t i = 0; i < batch.size(); ++i) {
    mlp_backward(model.phi.net, phi_traces[i], std::move(d_rep[i]), grad.phi);
  }

  for (const auto* g : {&grad.phi, &grad.h0, &grad.h1}) {
    for (const auto& layer : g->weights) {
      for (double e : layer) {
        if (!std::isfinite(e)) throw std::runtime_error("non-finite gradient");
      }
    }
    for (const auto& layer : g->biases) {
      for (double e : layer) {
        if (!std::isfinite(e)) throw std::runtime_error("non-finite gradient");
      }
    }
  }
  return grad;
}

void TrainConfig::validate() const {
  if (alpha < 0.0) throw std::invalid_argument("train config: alpha must be nonnegative");
  if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be positive");
  if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be at least 2");
  if (weight_init_scale < 0.0) {
    throw std::invalid_argument("train config: weight_init_scale must be nonnegative");
  }
}

double factual_loss(const CfrModel& model, const ObservationalDataset& ds) {
  if (ds.units.empty()) throw std::invalid_argument("factual_loss: empty dataset");
  double s = 0.0;
  for (const auto& unit : ds.units) {
    Trace tr_phi = mlp_trace(model.phi.net, unit.x);
    const Mlp& head = unit.t == 1 ? model.heads.h1 : model.heads.h0;
    Trace tr_head = mlp_trace(head, tr_phi.activations.back());
    s += point_loss(model.outcome_kind, tr_head.activations.back().at(0), unit.y_factual);
  }
  return s / static_cast<double>(ds.size());
}

namespace {

Mlp init_mlp(const std::vector<std::size_t>& widths, bool elu_output, double scale, Rng& rng) {
  Mlp m = Mlp::zeros(widths, elu_output);
  for (auto& layer : m.weights) {
    for (auto& w : layer) w = rng.uniform(-scale, scale);
  }
  for (auto& layer : m.biases) {
    for (auto& b : layer) b = rng.uniform(-scale, scale);
  }
  return m;
}

// Adam; keeps step sizes usable across the wide range of outcome scales
// the surfaces produce. Deterministic, so the training contract holds.
struct AdamState {
  MlpGrad m1;
  MlpGrad m2;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  explicit AdamState(const MlpGrad& shape) : m1(shape), m2(shape) {
    zero(m1);
    zero(m2);
  }
  static void zero(MlpGrad& g) {
    for (auto& layer : g.weights) std::fill(layer.begin(), layer.end(), 0.0);
    for (auto& layer : g.biases) std::fill(layer.begin(), layer.end(), 0.0);
  }
};

void adam_step(Mlp& m, const MlpGrad& g, AdamState& st, double lr, long step) {
  const double c1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(step));
  auto update = [&](std::vector<double>& p, const std::vector<double>& grad,
                    std::vector<double>& m1, std::vector<double>& m2) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m1[k] = AdamState::beta1 * m1[k] + (1.0 - AdamState::beta1) * grad[k];
      m2[k] = AdamState::beta2 * m2[k] + (1.0 - AdamState::beta2) * grad[k] * grad[k];
      p[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + AdamState::eps);
    }
  };
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    update(m.weights[l], g.weights[l], st.m1.weights[l], st.m2.weights[l]);
    update(m.biases[l], g.biases[l], st.m1.biases[l], st.m2.biases[l]);
  }
}

}  // namespace

CfrModel train_oracle(const ObservationalDataset& train, const ObservationalDataset& valid,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (train.units.empty() || valid.units.empty()) {
    throw std::invalid_argument("train_oracle: empty dataset");
  }
  if (train.count_arm(0) == 0 || train.count_arm(1) == 0) {
    throw std::invalid_argument("train_oracle: both treatment arms required");
  }

  Rng init_rng(mix_seed(cfg.seed, "oracle-init"));
  CfrModel model;
  model.outcome_kind = cfg.outcome_kind;
  std::vector<std::size_t> rep_widths{train.d};
  rep_widths.insert(rep_widths.end(), cfg.rep_hidden.begin(), cfg.rep_hidden.end());
  std::vector<std::size_t> head_widths{rep_widths.back()};
  head_widths.insert(head_widths.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
  head_widths.push_back(1);
  model.phi.net = init_mlp(rep_widths, true, cfg.weight_init_scale, init_rng);
  model.heads.h0 = init_mlp(head_widths, false, cfg.weight_init_scale, init_rng);
  model.heads.h1 = init_mlp(head_widths, false, cfg.weight_init_scale, init_rng);

  CfrModel best = model;
  double best_val = factual_loss(model, valid);

  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train.units[i].t == 1 ? treated : control).push_back(i);
  }
  const std::size_t n_batches = std::max<std::size_t>(
      1, std::min({train.size() / cfg.batch_size, treated.size(), control.size()}));

  Rng shuffle_rng(mix_seed(cfg.seed, "oracle-shuffle"));
  const std::vector<Triple> all = factual_triples(train);

  AdamState adam_phi{zero_grad(model.phi.net)};
  AdamState adam_h0{zero_grad(model.heads.h0)};
  AdamState adam_h1{zero_grad(model.heads.h1)};
  long step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(treated);
    shuffle_rng.shuffle(control);
    for (std::size_t b = 0; b < n_batches; ++b) {
      std::vector<Triple> batch;
      auto slice = [&](const std::vector<std::size_t>& idx) {
        const std::size_t lo = idx.size() * b / n_batches;
        const std::size_t hi = idx.size() * (b + 1) / n_batches;
        for (std::size_t k = lo; k < hi; ++k) batch.push_back(all[idx[k]]);
      };
      slice(control);
      slice(treated);
      try {
        CfrGradient g = gradient(model, batch, cfg);
        ++step;
        adam_step(model.phi.net, g.phi, adam_phi, cfg.learning_rate, step);
        adam_step(model.heads.h0, g.h0, adam_h0, cfg.learning_rate, step);
        adam_step(model.heads.h1, g.h1, adam_h1, cfg.learning_rate, step);
      } catch (const std::runtime_error&) {
        throw std::runtime_error("train_oracle diverged at epoch " + std::to_string(epoch + 1));
      }
    }
    double val;
    try {
      val = factual_loss(model, valid);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("train_oracle diverged at epoch " + std::to_string(epoch + 1));
    }
    if (!std::isfinite(val)) {
      throw std::runtime_error("train_oracle diverged at epoch " + std::to_string(epoch + 1));
    }
    if (val < best_val || !std::isfinite(best_val)) {
      best_val = val;
      best = model;
    }
  }
  return best;
}

namespace {

nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["widths"] = m.widths;
  j["elu_output"] = m.elu_output;
  j["weights"] = m.weights;
  j["biases"] = m.biases;
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  m.widths = j.at("widths").get<std::vector<std::size_t>>();
  m.elu_output = j.at("elu_output").get<bool>();
  m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (m.weights.size() + 1 != m.widths.size() && !(m.widths.size() == 1 && m.weights.empty())) {
    throw std::runtime_error("mlp checkpoint: inconsistent layer count");
  }
  return m;
}

}  // namespace

void save_cfr_model(const CfrModel& model, const std::string& path) {
  nlohmann::json j;
  j["outcome_kind"] = model.outcome_kind == OutcomeKind::binary ? "binary" : "regression";
  j["phi"] = mlp_to_json(model.phi.net);
  j["h0"] = mlp_to_json(model.heads.h0);
  j["h1"] = mlp_to_json(model.heads.h1);
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write model checkpoint: " + path);
  out << j.dump(2) << "\n";
}

CfrModel load_cfr_model(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open model checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  CfrModel m;
  m.outcome_kind =
      j.at("outcome_kind").get<std::string>() == "binary" ? OutcomeKind::binary : OutcomeKind::regression;
  m.phi.net = mlp_from_json(j.at("phi"));
  m.heads.h0 = mlp_from_json(j.at("h0"));
  m.heads.h1 = mlp_from_json(j.at("h1"));
  return m;
}

}  // namespace ite
