#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ite/datagen.hpp"
#include "ite/oracle.hpp"
#include "ite/rng.hpp"

using namespace ite;

namespace {

CfrModel random_model(std::uint64_t seed, OutcomeKind kind = OutcomeKind::regression,
                      double scale = 0.8) {
  Rng rng(seed);
  CfrModel m;
  m.outcome_kind = kind;
  m.phi.net = Mlp::zeros({2, 3, 2}, true);
  m.heads.h0 = Mlp::zeros({2, 2, 1}, false);
  m.heads.h1 = Mlp::zeros({2, 2, 1}, false);
  for (Mlp* net : {&m.phi.net, &m.heads.h0, &m.heads.h1}) {
    for (auto& layer : net->weights) {
      for (auto& w : layer) w = rng.uniform(-scale, scale);
    }
    for (auto& layer : net->biases) {
      for (auto& b : layer) b = rng.uniform(-scale, scale);
    }
  }
  return m;
}

std::vector<Triple> random_batch(std::uint64_t seed, std::size_t n_per_arm, bool binary) {
  Rng rng(seed);
  std::vector<Triple> batch;
  for (std::size_t i = 0; i < 2 * n_per_arm; ++i) {
    Triple tr;
    tr.x = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    tr.t = i < n_per_arm ? 0 : 1;
    tr.y = binary ? static_cast<double>(rng.bernoulli(0.5)) : rng.uniform(-2.0, 2.0);
    batch.push_back(std::move(tr));
  }
  return batch;
}

// flat views over every parameter, for finite differencing
std::vector<double*> parameter_view(CfrModel& m) {
  std::vector<double*> view;
  for (Mlp* net : {&m.phi.net, &m.heads.h0, &m.heads.h1}) {
    for (auto& layer : net->weights) {
      for (auto& w : layer) view.push_back(&w);
    }
    for (auto& layer : net->biases) {
      for (auto& b : layer) view.push_back(&b);
    }
  }
  return view;
}

std::vector<double> flatten_gradient(const CfrGradient& g) {
  std::vector<double> flat;
  for (const MlpGrad* net : {&g.phi, &g.h0, &g.h1}) {
    for (const auto& layer : net->weights) {
      for (double w : layer) flat.push_back(w);
    }
    for (const auto& layer : net->biases) {
      for (double b : layer) flat.push_back(b);
    }
  }
  return flat;
}

double max_fd_relative_error(CfrModel model, const std::vector<Triple>& batch,
                             const TrainConfig& cfg) {
  const CfrGradient analytic = gradient(model, batch, cfg);
  const std::vector<double> ga = flatten_gradient(analytic);
  const std::vector<double*> params = parameter_view(model);
  REQUIRE(ga.size() == params.size());

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double up = cfr_objective(model, batch, cfg);
    *params[k] = saved - h;
    const double dn = cfr_objective(model, batch, cfg);
    *params[k] = saved;
    const double fd = (up - dn) / (2.0 * h);
    const double rel =
        std::fabs(ga[k] - fd) / std::max({1e-4, std::fabs(ga[k]), std::fabs(fd)});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

TEST_CASE("mmd of a sample with itself is zero") {
  Rng rng(1);
  std::vector<std::vector<double>> a;
  for (int i = 0; i < 7; ++i) a.push_back({rng.normal(), rng.normal(), rng.normal()});
  CHECK(mmd_squared(a, a, Kernel::linear()) < 1e-12);
  CHECK(mmd_squared(a, a, Kernel::rbf(0.7)) < 1e-12);
}

TEST_CASE("linear-kernel mmd hand instance") {
  const std::vector<std::vector<double>> a = {{0.0, 0.0}, {2.0, 0.0}};
  const std::vector<std::vector<double>> b = {{1.0, 1.0}};
  CHECK(mmd_squared(a, b, Kernel::linear()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rbf mmd hand instance") {
  const std::vector<std::vector<double>> a = {{0.0}};
  const std::vector<std::vector<double>> b = {{10.0}};
  const double expected = 2.0 - 2.0 * std::exp(-50.0);
  CHECK(mmd_squared(a, b, Kernel::rbf(1.0)) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("linear mmd equals the squared mean difference") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 31 + 5);
    const std::size_t dim = 1 + rng.below(4);
    const std::size_t na = 1 + rng.below(12);
    const std::size_t nb = 1 + rng.below(12);
    std::vector<std::vector<double>> a, b;
    for (std::size_t i = 0; i < na; ++i) {
      std::vector<double> v(dim);
      for (auto& e : v) e = rng.uniform(-2.0, 2.0);
      a.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < nb; ++i) {
      std::vector<double> v(dim);
      for (auto& e : v) e = rng.uniform(-2.0, 2.0);
      b.push_back(std::move(v));
    }
    std::vector<double> mean_diff(dim, 0.0);
    for (const auto& v : a) {
      for (std::size_t j = 0; j < dim; ++j) mean_diff[j] += v[j] / static_cast<double>(na);
    }
    for (const auto& v : b) {
      for (std::size_t j = 0; j < dim; ++j) mean_diff[j] -= v[j] / static_cast<double>(nb);
    }
    double expected = 0.0;
    for (double e : mean_diff) expected += e * e;
    const double got = mmd_squared(a, b, Kernel::linear());
    CHECK(std::fabs(got - expected) < 1e-10);
    CHECK(got >= 0.0);
    CHECK(mmd_squared(b, a, Kernel::linear()) == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("mmd rejects mismatched dimensions") {
  const std::vector<std::vector<double>> a = {{0.0, 1.0}};
  const std::vector<std::vector<double>> b = {{1.0}};
  CHECK_THROWS_AS(mmd_squared(a, b, Kernel::linear()), std::invalid_argument);
}

TEST_CASE("forward on degenerate networks") {
  CfrModel m;
  m.phi.net = Mlp::zeros({3, 2}, true);
  m.heads.h0 = Mlp::zeros({2, 1}, false);
  m.heads.h1 = Mlp::zeros({2, 1}, false);
  SUBCASE("zero weights, regression") {
    m.outcome_kind = OutcomeKind::regression;
    CHECK(forward(m, {1.0, -2.0, 3.0}, 0) == 0.0);
    CHECK(forward(m, {0.5, 0.5, 0.5}, 1) == 0.0);
  }
  SUBCASE("zero weights, binary") {
    m.outcome_kind = OutcomeKind::binary;
    CHECK(forward(m, {1.0, -2.0, 3.0}, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("forward composes the representation and head affinely") {
  CfrModel m;
  m.outcome_kind = OutcomeKind::regression;
  m.phi.net = Mlp::zeros({1, 1}, true);
  m.phi.net.weights[0] = {1.0};  // identity on positive inputs (elu passes them through)
  m.heads.h0 = Mlp::zeros({1, 1}, false);
  m.heads.h1 = Mlp::zeros({1, 1}, false);
  m.heads.h1.weights[0] = {2.0};
  CHECK(forward(m, {3.0}, 1) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(forward(m, {3.0}, 0) == 0.0);
}

TEST_CASE("forward reports the offending layer on overflow") {
  CfrModel m;
  m.outcome_kind = OutcomeKind::regression;
  m.phi.net = Mlp::zeros({1, 2, 2}, true);
  m.phi.net.weights[0] = {1e308, 1e308};
  m.heads.h0 = Mlp::zeros({2, 1}, false);
  m.heads.h1 = Mlp::zeros({2, 1}, false);
  CHECK_THROWS_WITH_AS(forward(m, {1e10}, 0), doctest::Contains("layer"), std::runtime_error);
}

TEST_CASE("objective with the penalty off is the weighted factual loss") {
  CfrModel m = random_model(3);
  const auto batch = random_batch(4, 3, false);
  TrainConfig cfg;
  cfg.alpha = 0.0;

  double u = 0.0;
  for (const auto& tr : batch) u += tr.t;
  u /= static_cast<double>(batch.size());
  double expected = 0.0;
  for (const auto& tr : batch) {
    const double w = tr.t == 1 ? 1.0 / (2.0 * u) : 1.0 / (2.0 * (1.0 - u));
    const double r = forward(m, tr.x, tr.t) - tr.y;
    expected += w * r * r;
  }
  expected /= static_cast<double>(batch.size());
  CHECK(cfr_objective(m, batch, cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("objective of a perfect regression model is zero") {
  CfrModel m;
  m.outcome_kind = OutcomeKind::regression;
  m.phi.net = Mlp::zeros({2, 2}, true);
  m.heads.h0 = Mlp::zeros({2, 1}, false);
  m.heads.h1 = Mlp::zeros({2, 1}, false);
  std::vector<Triple> batch = {{{0.4, -1.0}, 0, 0.0}, {{0.2, 0.3}, 1, 0.0}};
  TrainConfig cfg;
  cfg.alpha = 0.0;
  CHECK(cfr_objective(m, batch, cfg) == 0.0);
}

TEST_CASE("objective matches an independent closed-form evaluation") {
  CfrModel m = random_model(11);
  const auto batch = random_batch(12, 2, false);
  TrainConfig cfg;
  cfg.alpha = 0.6;
  cfg.kernel = Kernel::linear();

  // independent route: weighted loss plus alpha * sqrt(||mean0 - mean1||^2)
  double u = 0.0;
  for (const auto& tr : batch) u += tr.t;
  u /= static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> mean0(2, 0.0), mean1(2, 0.0);
  double n0 = 0.0, n1 = 0.0;
  for (const auto& tr : batch) {
    const double w = tr.t == 1 ? 1.0 / (2.0 * u) : 1.0 / (2.0 * (1.0 - u));
    const double r = forward(m, tr.x, tr.t) - tr.y;
    loss += w * r * r;
    const auto rep = m.representation(tr.x);
    if (tr.t == 1) {
      for (std::size_t j = 0; j < rep.size(); ++j) mean1[j] += rep[j];
      n1 += 1.0;
    } else {
      for (std::size_t j = 0; j < rep.size(); ++j) mean0[j] += rep[j];
      n0 += 1.0;
    }
  }
  loss /= static_cast<double>(batch.size());
  double mmd = 0.0;
  for (std::size_t j = 0; j < mean0.size(); ++j) {
    const double diff = mean0[j] / n0 - mean1[j] / n1;
    mmd += diff * diff;
  }
  const double expected = loss + cfg.alpha * std::sqrt(mmd + 1e-12);
  CHECK(cfr_objective(m, batch, cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("objective rejects a single-arm batch when the penalty is on") {
  CfrModel m = random_model(2);
  std::vector<Triple> batch = {{{0.1, 0.1}, 1, 0.5}, {{0.3, -0.2}, 1, 0.1}};
  TrainConfig cfg;
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfr_objective(m, batch, cfg), std::invalid_argument);
  CHECK_THROWS_AS(gradient(m, batch, cfg), std::invalid_argument);
  cfg.alpha = 0.0;
  CHECK_NOTHROW(cfr_objective(m, batch, cfg));
}

TEST_CASE("gradient vanishes at a perfect fit") {
  CfrModel m;
  m.outcome_kind = OutcomeKind::regression;
  m.phi.net = Mlp::zeros({2, 2}, true);
  m.heads.h0 = Mlp::zeros({2, 1}, false);
  m.heads.h1 = Mlp::zeros({2, 1}, false);
  std::vector<Triple> batch = {{{0.4, -1.0}, 0, 0.0}, {{0.2, 0.3}, 1, 0.0}};
  TrainConfig cfg;
  cfg.alpha = 0.0;
  const auto flat = flatten_gradient(gradient(m, batch, cfg));
  for (double g : flat) CHECK(std::fabs(g) < 1e-10);
}

TEST_CASE("single affine head gradient equals the hand derivation") {
  CfrModel m;
  m.outcome_kind = OutcomeKind::regression;
  m.phi.net = Mlp::zeros({1}, true);  // identity representation
  m.heads.h0 = Mlp::zeros({1, 1}, false);
  m.heads.h1 = Mlp::zeros({1, 1}, false);
  m.heads.h0.weights[0] = {0.3};
  m.heads.h0.biases[0] = {0.1};
  m.heads.h1.weights[0] = {-0.2};
  m.heads.h1.biases[0] = {0.4};
  std::vector<Triple> batch = {{{2.0}, 0, 1.0}, {{-1.0}, 1, 0.5}};
  TrainConfig cfg;
  cfg.alpha = 0.0;
  const CfrGradient g = gradient(m, batch, cfg);
  // per-unit weight 1 (balanced batch), prefactor 1/m = 1/2, d/dw (f-y)^2 = 2(f-y)x
  CHECK(g.h0.weights[0][0] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(g.h0.biases[0][0] == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(g.h1.weights[0][0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(g.h1.biases[0][0] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    TrainConfig cfg;
    cfg.alpha = seed % 3 == 0 ? 0.0 : 0.7;
    cfg.kernel = seed % 2 == 0 ? Kernel::linear() : Kernel::rbf(0.8);
    const bool binary = seed % 5 == 0;
    CfrModel m = random_model(1000 + seed, binary ? OutcomeKind::binary : OutcomeKind::regression);
    const auto batch = random_batch(2000 + seed, 3, binary);
    worst = std::max(worst, max_fd_relative_error(m, batch, cfg));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training reaches the noise floor on a linear surface") {
  DgpConfig dgp;
  dgp.n = 2000;
  dgp.d = 5;
  dgp.confounding_strength = 1.0;
  dgp.noise_sd = 0.1;
  dgp.surface = Surface::linear;
  dgp.seed = 60;
  const auto ds = generate_observational(dgp);
  SplitSpec split_spec;
  split_spec.seed = 1;
  const auto parts = split(ds, split_spec);

  TrainConfig cfg;
  cfg.alpha = 0.1;
  cfg.kernel = Kernel::rbf(2.0);
  cfg.learning_rate = 0.03;
  cfg.batch_size = 100;
  cfg.epochs = 120;
  cfg.seed = 7;
  cfg.rep_hidden = {32, 16};
  cfg.head_hidden = {16};
  const CfrModel model = train_oracle(parts.train, parts.validation, cfg);
  const double val = factual_loss(model, parts.validation);
  CHECK(val < 2.0 * dgp.noise_sd * dgp.noise_sd);
}

TEST_CASE("predicted ite") {
  SUBCASE("identical heads give zero everywhere") {
    CfrModel m;
    m.phi.net = Mlp::zeros({2, 2}, true);
    m.heads.h0 = Mlp::zeros({2, 1}, false);
    m.heads.h1 = Mlp::zeros({2, 1}, false);
    CHECK(predicted_ite(m, {0.3, -0.7}) == 0.0);
  }
  SUBCASE("f(x,t) = t gives one everywhere") {
    FunctionPredictor f([](const std::vector<double>&, int t) { return double(t); });
    CHECK(predicted_ite(f, {1.0}) == 1.0);
  }
  SUBCASE("constant-effect training recovers the effect") {
    DgpConfig dgp;
    dgp.n = 5000;
    dgp.d = 4;
    dgp.confounding_strength = 1.0;
    dgp.noise_sd = 0.1;
    dgp.surface = Surface::linear;
    dgp.seed = 15;
    DgpParams params = default_dgp_params(dgp);
    params.beta1 = params.beta0;
    params.c = 0.7;
    const auto ds = generate_observational(dgp, params);
    SplitSpec split_spec;
    split_spec.seed = 2;
    const auto parts = split(ds, split_spec);
    TrainConfig cfg;
    cfg.alpha = 0.1;
    cfg.kernel = Kernel::rbf(2.0);
    cfg.learning_rate = 0.03;
    cfg.batch_size = 128;
    cfg.epochs = 60;
    cfg.seed = 3;
    cfg.rep_hidden = {32, 16};
    cfg.head_hidden = {16};
    const CfrModel model = train_oracle(parts.train, parts.validation, cfg);
    double mean_ite = 0.0;
    for (const auto& u : parts.test.units) mean_ite += predicted_ite(model, u.x);
    mean_ite /= static_cast<double>(parts.test.size());
    CHECK(std::fabs(mean_ite - 0.7) < 0.1);
  }
}

TEST_CASE("zero epochs returns the seeded initialization, and training is deterministic") {
  DgpConfig dgp;
  dgp.n = 300;
  dgp.d = 3;
  dgp.seed = 33;
  const auto ds = generate_observational(dgp);
  SplitSpec split_spec;
  split_spec.seed = 4;
  const auto parts = split(ds, split_spec);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 99;
  cfg.kernel = Kernel::linear();

  const CfrModel a = train_oracle(parts.train, parts.validation, cfg);
  const CfrModel b = train_oracle(parts.train, parts.validation, cfg);
  CHECK(a.phi.net.weights == b.phi.net.weights);
  CHECK(a.heads.h0.weights == b.heads.h0.weights);

  cfg.epochs = 5;
  const CfrModel c = train_oracle(parts.train, parts.validation, cfg);
  const CfrModel d = train_oracle(parts.train, parts.validation, cfg);
  CHECK(c.phi.net.weights == d.phi.net.weights);
  CHECK(c.phi.net.weights != a.phi.net.weights);
}

TEST_CASE("training throws a divergence error naming the epoch") {
  DgpConfig dgp;
  dgp.n = 300;
  dgp.d = 3;
  dgp.noise_sd = 1.0;
  dgp.seed = 44;
  const auto ds = generate_observational(dgp);
  SplitSpec split_spec;
  split_spec.seed = 4;
  const auto parts = split(ds, split_spec);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.weight_init_scale = 1e160;  // first forward pass overflows
  cfg.kernel = Kernel::linear();
  CHECK_THROWS_WITH_AS(train_oracle(parts.train, parts.validation, cfg),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("checkpoint round-trip is exact") {
  CfrModel m = random_model(123, OutcomeKind::binary);
  const auto path = std::filesystem::temp_directory_path() / "ite_oracle_ckpt.json";
  save_cfr_model(m, path.string());
  const CfrModel back = load_cfr_model(path.string());
  CHECK(back.outcome_kind == m.outcome_kind);
  CHECK(back.phi.net.widths == m.phi.net.widths);
  CHECK(back.phi.net.weights == m.phi.net.weights);
  CHECK(back.phi.net.biases == m.phi.net.biases);
  CHECK(back.heads.h0.weights == m.heads.h0.weights);
  CHECK(back.heads.h1.weights == m.heads.h1.weights);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> x = {rng.normal(), rng.normal()};
    CHECK(forward(back, x, i % 2) == forward(m, x, i % 2));
  }
}
