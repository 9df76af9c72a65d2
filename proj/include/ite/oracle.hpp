#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ite/dataset.hpp"
#include "ite/kernels.hpp"
#include "ite/predictor.hpp"

namespace ite {

enum class OutcomeKind { regression, binary };

// Fully connected stack with exponential-linear hidden units.
// elu_output controls whether the last layer is activated too: the
// representation net activates every layer, the heads end linear
// (a logit, for binary outcomes).
struct Mlp {
  std::vector<std::size_t> widths;  // [in, h1, ..., out]
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;
  bool elu_output = true;

  std::size_t n_layers() const { return weights.size(); }
  std::size_t in_dim() const { return widths.front(); }
  std::size_t out_dim() const { return widths.back(); }

  static Mlp zeros(const std::vector<std::size_t>& widths, bool elu_output);
};

struct RepresentationNet {
  Mlp net;  // ELU on every layer
  std::size_t rep_dim() const { return net.out_dim(); }
};

struct HypothesisNet {
  Mlp h0;  // ELU hidden, linear output
  Mlp h1;
};

struct CfrModel : Predictor {
  RepresentationNet phi;
  HypothesisNet heads;
  OutcomeKind outcome_kind = OutcomeKind::regression;

  std::vector<double> representation(const std::vector<double>& x) const;
  double predict(const std::vector<double>& x, int t) const override;
};

struct TrainConfig {
  double alpha = 1.0;                 // IPM penalty weight
  Kernel kernel = Kernel::linear();
  double learning_rate = 0.05;
  std::size_t batch_size = 100;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  double weight_init_scale = 0.1;
  std::vector<std::size_t> rep_hidden = {32, 32, 16};
  std::vector<std::size_t> head_hidden = {16, 16};
  OutcomeKind outcome_kind = OutcomeKind::regression;

  void validate() const;
};

// Squared maximum mean discrepancy between two samples, V-statistic with
// diagonal terms included so the estimate is nonnegative:
//   mean_{a,a'} k(a,a') + mean_{b,b'} k(b,b') - 2 mean_{a,b} k(a,b).
// Values inside -1e-12 of zero are clamped to zero.
double mmd_squared(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b, const Kernel& kernel);

// h_t(phi(x)); a probability for binary outcomes. Throws on a non-finite
// intermediate, naming the layer.
double forward(const CfrModel& model, const std::vector<double>& x, int t);

// Weighted factual loss plus alpha * sqrt(mmd^2 + 1e-12) between the
// per-arm representation clouds. Weights are t/(2u) and (1-t)/(2(1-u))
// with u the batch fraction treated.
double cfr_objective(const CfrModel& model, const std::vector<Triple>& batch,
                     const TrainConfig& cfg);

struct MlpGrad {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

struct CfrGradient {
  MlpGrad phi;
  MlpGrad h0;
  MlpGrad h1;
};

// Exact reverse-mode gradient of cfr_objective in every parameter.
CfrGradient gradient(const CfrModel& model, const std::vector<Triple>& batch,
                     const TrainConfig& cfg);

// Minibatch gradient descent with arm-stratified batches; returns the
// parameter snapshot with the lowest validation factual loss. Deterministic
// for equal inputs and config.
CfrModel train_oracle(const ObservationalDataset& train, const ObservationalDataset& valid,
                      const TrainConfig& cfg);

// Unweighted mean factual loss (squared error or cross-entropy).
double factual_loss(const CfrModel& model, const ObservationalDataset& ds);

void save_cfr_model(const CfrModel& model, const std::string& path);
CfrModel load_cfr_model(const std::string& path);

}  // namespace ite
