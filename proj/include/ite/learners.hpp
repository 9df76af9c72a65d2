#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ite/dataset.hpp"
#include "ite/kernels.hpp"
#include "ite/predictor.hpp"

namespace ite {

enum class LearnerKind { cart, honest_tree, lasso, kernel_ridge, random_forest, gbm };

// Hyperparameters for one interpretable learner. Treatment is always fed
// to the learner as an appended feature (column d, after the covariates).
struct LearnerSpec {
  LearnerKind kind = LearnerKind::cart;
  int max_depth = 6;
  int min_leaf = 1;
  double lambda = 0.1;
  Kernel kernel = Kernel::rbf(1.0);
  int n_trees = 50;
  int n_rounds = 100;
  double shrinkage = 0.1;
  std::uint64_t seed = 0;

  static LearnerSpec cart(int max_depth, int min_leaf = 1);
  static LearnerSpec honest_tree(int max_depth, int min_leaf = 1, std::uint64_t seed = 0);
  static LearnerSpec lasso_spec(double lambda);
  static LearnerSpec kernel_ridge(double lambda, Kernel kernel);
  static LearnerSpec random_forest(int n_trees, int max_depth, int min_leaf, std::uint64_t seed);
  static LearnerSpec gbm(int n_rounds, double shrinkage, int max_depth);

  void validate() const;
  std::string label() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int n_samples = 0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const std::vector<double>& row) const;
  int leaf_for(const std::vector<double>& row) const;
};

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coef;    // original feature scale
  std::vector<double> mean;    // standardization used during fitting
  std::vector<double> scale;

  double predict(const std::vector<double>& row) const;
};

struct KernelModel {
  std::vector<std::vector<double>> support;
  std::vector<double> alpha;
  Kernel kernel = Kernel::linear();
  double lambda = 0.0;
  double y_mean = 0.0;

  double predict(const std::vector<double>& row) const;
};

struct Ensemble {
  enum class Rule { average, boosted_sum };
  Rule rule = Rule::average;
  double base = 0.0;       // boosted_sum only
  double shrinkage = 1.0;  // boosted_sum only
  std::vector<RegressionTree> trees;

  double predict(const std::vector<double>& row) const;
};

struct InterpretableModel : Predictor {
  LearnerSpec spec;
  std::size_t n_features = 0;  // covariate dimension plus the treatment column
  std::variant<RegressionTree, LinearModel, KernelModel, Ensemble> model;

  double predict_row(const std::vector<double>& row) const;
  double predict(const std::vector<double>& x, int t) const override;
};

// Fits the learner named by the spec to labeled triples, with t appended
// as feature d.
InterpretableModel fit(const LearnerSpec& spec, const std::vector<Triple>& data);

// Greedy variance-reduction CART over (feature, midpoint) candidates;
// ties in gain break toward the lower feature index, then lower threshold.
RegressionTree cart_fit(const std::vector<Triple>& data, int max_depth, int min_leaf);

// Structure grown on a seeded half of the data, leaf values re-estimated
// on the other half; an estimation-empty leaf inherits the nearest
// ancestor's estimation mean.
RegressionTree honest_tree_fit(const std::vector<Triple>& data, int max_depth, int min_leaf,
                               std::uint64_t seed);

// Replaces every leaf value with the mean of the estimation samples routed
// to it (exposed separately so the re-estimation rule is testable).
void reestimate_leaves(RegressionTree& tree, const std::vector<Triple>& estimation);

struct LassoTrace {
  std::vector<double> objective_per_sweep;
  int sweeps = 0;
  bool converged = false;
};

// Cyclic coordinate descent with soft-thresholding on standardized
// features; minimizes (1/2n)||y - Zb||^2 + lambda*||b||_1.
LinearModel lasso_fit(const std::vector<Triple>& data, double lambda,
                      LassoTrace* trace = nullptr);

struct LassoNonConvergence : std::runtime_error {
  LinearModel last_iterate;
  explicit LassoNonConvergence(LinearModel last)
      : std::runtime_error("lasso did not converge within 10000 sweeps"),
        last_iterate(std::move(last)) {}
};

// Dual closed form: (K + lambda*n*I) alpha = y - mean(y).
KernelModel kernel_ridge_fit(const std::vector<Triple>& data, double lambda,
                             const Kernel& kernel);

// Bootstrap-aggregated CART with ceil(sqrt(q)) features sampled per split.
Ensemble random_forest_fit(const std::vector<Triple>& data, int n_trees, int max_depth,
                           int min_leaf, std::uint64_t seed);

// Least-squares boosting: every round fits a tree to the residuals.
Ensemble gbm_fit(const std::vector<Triple>& data, int n_rounds, double shrinkage, int max_depth);

std::string render(const InterpretableModel& model,
                   const std::vector<std::string>& feature_names = {});

nlohmann::json model_to_json(const InterpretableModel& model);
InterpretableModel model_from_json(const nlohmann::json& j);
void save_model(const InterpretableModel& model, const std::string& path);
InterpretableModel load_model(const std::string& path);

void to_json(nlohmann::json& j, const LearnerSpec& spec);
void from_json(const nlohmann::json& j, LearnerSpec& spec);
void to_json(nlohmann::json& j, const Kernel& k);
void from_json(const nlohmann::json& j, Kernel& k);

}  // namespace ite
