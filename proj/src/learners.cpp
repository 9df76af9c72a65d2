#include "ite/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ite/rng.hpp"

namespace ite {

namespace {

// covariates with the treatment appended as the last feature
std::vector<std::vector<double>> design_rows(const std::vector<Triple>& data) {
  std::vector<std::vector<double>> rows;
  rows.reserve(data.size());
  for (const auto& tr : data) {
    std::vector<double> row = tr.x;
    row.push_back(static_cast<double>(tr.t));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> labels(const std::vector<Triple>& data) {
  std::vector<double> y;
  y.reserve(data.size());
  for (const auto& tr : data) y.push_back(tr.y);
  return y;
}

void check_data(const std::vector<Triple>& data) {
  if (data.empty()) throw std::invalid_argument("fit: empty dataset");
  const std::size_t d = data.front().x.size();
  for (const auto& tr : data) {
    if (tr.x.size() != d) throw std::invalid_argument("fit: inconsistent covariate dimension");
    if (!std::isfinite(tr.y)) throw std::invalid_argument("fit: non-finite label");
  }
}

double mean_of(const std::vector<double>& v, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += v[i];
  return s / static_cast<double>(idx.size());
}

struct TreeGrower {
  const std::vector<std::vector<double>>& rows;
  const std::vector<double>& y;
  int max_depth;
  int min_leaf;
  int mtry;   // 0 means all features
  Rng* rng;   // only used when mtry > 0
  std::vector<TreeNode> nodes;

  int grow(std::vector<int> idx, int depth) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node_id].n_samples = static_cast<int>(idx.size());

    // sum labels in sorted order so the fit depends only on the sample
    // multiset, not the row order
    std::vector<double> node_y;
    node_y.reserve(idx.size());
    for (int i : idx) node_y.push_back(y[i]);
    std::sort(node_y.begin(), node_y.end());
    double sum = 0.0, sum2 = 0.0;
    for (double v : node_y) {
      sum += v;
      sum2 += v * v;
    }
    const double n = static_cast<double>(idx.size());
    const double node_mean = sum / n;
    nodes[node_id].value = node_mean;
    const double sse_total = std::max(0.0, sum2 - sum * sum / n);

    if (depth >= max_depth || static_cast<int>(idx.size()) < 2 * min_leaf) return node_id;

    const std::size_t q = rows.front().size();
    std::vector<int> features(q);
    std::iota(features.begin(), features.end(), 0);
    if (mtry > 0 && mtry < static_cast<int>(q)) {
      for (int k = 0; k < mtry; ++k) {
        std::swap(features[k], features[k + rng->below(q - k)]);
      }
      features.resize(mtry);
      std::sort(features.begin(), features.end());
    }

    // ignore gains at rounding scale so constant labels stop recursion
    const double gain_floor = 1e-12 * (1.0 + sse_total);
    double best_gain = gain_floor;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, double>> vals(idx.size());  // (feature value, label)
    for (int f : features) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        vals[k] = {rows[idx[k]][f], y[idx[k]]};
      }
      std::sort(vals.begin(), vals.end());
      double lsum = 0.0, lsum2 = 0.0;
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        lsum += vals[k].second;
        lsum2 += vals[k].second * vals[k].second;
        if (vals[k].first == vals[k + 1].first) continue;
        const int nl = static_cast<int>(k) + 1;
        const int nr = static_cast<int>(vals.size()) - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double rsum = sum - lsum;
        const double rsum2 = sum2 - lsum2;
        const double sse_l = std::max(0.0, lsum2 - lsum * lsum / nl);
        const double sse_r = std::max(0.0, rsum2 - rsum * rsum / nr);
        const double gain = sse_total - sse_l - sse_r;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (vals[k].first + vals[k + 1].first);
        }
      }
    }

    if (best_feature < 0) return node_id;

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      (rows[i][best_feature] <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    nodes[node_id].feature = best_feature;
    nodes[node_id].threshold = best_threshold;
    const int left = grow(std::move(left_idx), depth + 1);
    nodes[node_id].left = left;
    const int right = grow(std::move(right_idx), depth + 1);
    nodes[node_id].right = right;
    return node_id;
  }
};

RegressionTree grow_tree(const std::vector<std::vector<double>>& rows,
                         const std::vector<double>& y, const std::vector<int>& idx,
                         int max_depth, int min_leaf, int mtry = 0, Rng* rng = nullptr) {
  TreeGrower grower{rows, y, max_depth, min_leaf, mtry, rng, {}};
  grower.grow(idx, 0);
  RegressionTree tree;
  tree.nodes = std::move(grower.nodes);
  return tree;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

LearnerSpec LearnerSpec::cart(int max_depth, int min_leaf) {
  LearnerSpec s;
  s.kind = LearnerKind::cart;
  s.max_depth = max_depth;
  s.min_leaf = min_leaf;
  return s;
}

LearnerSpec LearnerSpec::honest_tree(int max_depth, int min_leaf, std::uint64_t seed) {
  LearnerSpec s;
  s.kind = LearnerKind::honest_tree;
  s.max_depth = max_depth;
  s.min_leaf = min_leaf;
  s.seed = seed;
  return s;
}

LearnerSpec LearnerSpec::lasso_spec(double lambda) {
  LearnerSpec s;
  s.kind = LearnerKind::lasso;
  s.lambda = lambda;
  return s;
}

LearnerSpec LearnerSpec::kernel_ridge(double lambda, Kernel kernel) {
  LearnerSpec s;
  s.kind = LearnerKind::kernel_ridge;
  s.lambda = lambda;
  s.kernel = kernel;
  return s;
}

LearnerSpec LearnerSpec::random_forest(int n_trees, int max_depth, int min_leaf,
                                       std::uint64_t seed) {
  LearnerSpec s;
  s.kind = LearnerKind::random_forest;
  s.n_trees = n_trees;
  s.max_depth = max_depth;
  s.min_leaf = min_leaf;
  s.seed = seed;
  return s;
}

LearnerSpec LearnerSpec::gbm(int n_rounds, double shrinkage, int max_depth) {
  LearnerSpec s;
  s.kind = LearnerKind::gbm;
  s.n_rounds = n_rounds;
  s.shrinkage = shrinkage;
  s.max_depth = max_depth;
  return s;
}

void LearnerSpec::validate() const {
  if (max_depth < 0) throw std::invalid_argument("learner: max_depth must be nonnegative");
  if (min_leaf < 1) throw std::invalid_argument("learner: min_leaf must be at least 1");
  if (lambda < 0.0) throw std::invalid_argument("learner: lambda must be nonnegative");
  if (n_trees < 1) throw std::invalid_argument("learner: n_trees must be at least 1");
  if (n_rounds < 0) throw std::invalid_argument("learner: n_rounds must be nonnegative");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
    throw std::invalid_argument("learner: shrinkage must lie in (0,1]");
  }
}

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string LearnerSpec::label() const {
  switch (kind) {
    case LearnerKind::cart:
      return "cart_depth" + std::to_string(max_depth);
    case LearnerKind::honest_tree:
      return "honest_depth" + std::to_string(max_depth);
    case LearnerKind::lasso:
      return "lasso_l" + fmt_g(lambda);
    case LearnerKind::kernel_ridge:
      return "kridge_" + kernel.name() + "_l" + fmt_g(lambda);
    case LearnerKind::random_forest:
      return "rf" + std::to_string(n_trees) + "_depth" + std::to_string(max_depth);
    case LearnerKind::gbm:
      return "gbm" + std::to_string(n_rounds) + "_depth" + std::to_string(max_depth);
  }
  return "unknown";
}

double RegressionTree::predict(const std::vector<double>& row) const {
  return nodes[leaf_for(row)].value;
}

int RegressionTree::leaf_for(const std::vector<double>& row) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    node = row[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                             : nodes[node].right;
  }
  return node;
}

double LinearModel::predict(const std::vector<double>& row) const {
  double s = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * row[j];
  return s;
}

double KernelModel::predict(const std::vector<double>& row) const {
  double s = y_mean;
  for (std::size_t i = 0; i < support.size(); ++i) s += alpha[i] * kernel(row, support[i]);
  return s;
}

double Ensemble::predict(const std::vector<double>& row) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(row);
  if (rule == Rule::average) return s / static_cast<double>(trees.size());
  return base + shrinkage * s;
}

double InterpretableModel::predict_row(const std::vector<double>& row) const {
  return std::visit([&row](const auto& m) { return m.predict(row); }, model);
}

double InterpretableModel::predict(const std::vector<double>& x, int t) const {
  std::vector<double> row = x;
  row.push_back(static_cast<double>(t));
  return predict_row(row);
}

RegressionTree cart_fit(const std::vector<Triple>& data, int max_depth, int min_leaf) {
  check_data(data);
  const auto rows = design_rows(data);
  const auto y = labels(data);
  return grow_tree(rows, y, all_indices(data.size()), max_depth, min_leaf);
}

void reestimate_leaves(RegressionTree& tree, const std::vector<Triple>& estimation) {
  const auto rows = design_rows(estimation);
  const auto y = labels(estimation);

  std::vector<double> sums(tree.nodes.size(), 0.0);
  std::vector<int> counts(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int node = 0;
    for (;;) {
      sums[node] += y[i];
      counts[node] += 1;
      if (tree.nodes[node].feature < 0) break;
      node = rows[i][tree.nodes[node].feature] <= tree.nodes[node].threshold
                 ? tree.nodes[node].left
                 : tree.nodes[node].right;
    }
  }

  std::vector<int> parent(tree.nodes.size(), -1);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].feature >= 0) {
      parent[tree.nodes[i].left] = static_cast<int>(i);
      parent[tree.nodes[i].right] = static_cast<int>(i);
    }
  }

  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].feature >= 0) continue;
    int node = static_cast<int>(i);
    while (node >= 0 && counts[node] == 0) node = parent[node];
    if (node >= 0) {
      tree.nodes[i].value = sums[node] / counts[node];
      tree.nodes[i].n_samples = counts[static_cast<int>(i)];
    }
    // estimation set empty altogether: keep the structure value
  }
}

RegressionTree honest_tree_fit(const std::vector<Triple>& data, int max_depth, int min_leaf,
                               std::uint64_t seed) {
  check_data(data);
  std::vector<int> idx = all_indices(data.size());
  Rng rng(mix_seed(seed, "honest-split"));
  rng.shuffle(idx);
  const std::size_t n_struct = (data.size() + 1) / 2;
  std::vector<Triple> structure, estimation;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k < n_struct ? structure : estimation).push_back(data[idx[k]]);
  }
  RegressionTree tree = cart_fit(structure, max_depth, min_leaf);
  // a single-sample fit has no estimation half; keep the structure values
  if (!estimation.empty()) reestimate_leaves(tree, estimation);
  return tree;
}

LinearModel lasso_fit(const std::vector<Triple>& data, double lambda, LassoTrace* trace) {
  check_data(data);
  const auto rows = design_rows(data);
  const auto y = labels(data);
  const std::size_t n = rows.size();
  const std::size_t q = rows.front().size();

  LinearModel model;
  model.mean.assign(q, 0.0);
  model.scale.assign(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += rows[i][j];
      s2 += rows[i][j] * rows[i][j];
    }
    model.mean[j] = s / static_cast<double>(n);
    const double var = std::max(0.0, s2 / static_cast<double>(n) - model.mean[j] * model.mean[j]);
    model.scale[j] = std::sqrt(var);
  }

  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  // standardized design; constant features become all-zero columns
  std::vector<std::vector<double>> z(n, std::vector<double>(q));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      z[i][j] = model.scale[j] > 0.0 ? (rows[i][j] - model.mean[j]) / model.scale[j] : 0.0;
    }
  }

  std::vector<double> beta(q, 0.0);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_mean;

  constexpr int kMaxSweeps = 10000;
  constexpr double kTol = 1e-8;
  bool converged = false;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      if (model.scale[j] == 0.0) continue;
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += z[i][j] * (residual[i] + z[i][j] * beta[j]);
      rho /= static_cast<double>(n);
      const double nb = std::copysign(std::max(std::fabs(rho) - lambda, 0.0), rho);
      const double delta = nb - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= z[i][j] * delta;
        beta[j] = nb;
        max_change = std::max(max_change, std::fabs(delta));
      }
    }
    if (trace) {
      double sse = 0.0;
      for (double r : residual) sse += r * r;
      double l1 = 0.0;
      for (double b : beta) l1 += std::fabs(b);
      trace->objective_per_sweep.push_back(sse / (2.0 * static_cast<double>(n)) + lambda * l1);
    }
    if (max_change < kTol) {
      converged = true;
      ++sweep;
      break;
    }
  }

  model.intercept = y_mean;
  model.coef.assign(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    if (model.scale[j] > 0.0) model.coef[j] = beta[j] / model.scale[j];
  }
  double adjust = 0.0;
  for (std::size_t j = 0; j < q; ++j) adjust += model.coef[j] * model.mean[j];
  model.intercept = y_mean - adjust;

  if (trace) {
    trace->sweeps = sweep;
    trace->converged = converged;
  }
  if (!converged) throw LassoNonConvergence(model);
  return model;
}

namespace {

// Gaussian elimination with partial pivoting; throws on a singular system.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = a.size();
  double max_entry = 0.0;
  for (const auto& row : a) {
    for (double v : row) max_entry = std::max(max_entry, std::fabs(v));
  }
  const double tol = 1e-12 * std::max(1.0, max_entry);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) <= tol) throw std::runtime_error("singular linear system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

}  // namespace

KernelModel kernel_ridge_fit(const std::vector<Triple>& data, double lambda,
                             const Kernel& kernel) {
  check_data(data);
  if (lambda < 0.0) throw std::invalid_argument("kernel_ridge_fit: lambda must be nonnegative");
  const auto rows = design_rows(data);
  const auto y = labels(data);
  const std::size_t n = rows.size();

  KernelModel model;
  model.kernel = kernel;
  model.lambda = lambda;
  model.y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  model.support = rows;

  std::vector<std::vector<double>> gram(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      gram[i][j] = gram[j][i] = kernel(rows[i], rows[j]);
    }
    gram[i][i] += lambda * static_cast<double>(n);
  }
  std::vector<double> yc(n);
  for (std::size_t i = 0; i < n; ++i) yc[i] = y[i] - model.y_mean;
  model.alpha = solve_dense(std::move(gram), std::move(yc));
  return model;
}

Ensemble random_forest_fit(const std::vector<Triple>& data, int n_trees, int max_depth,
                           int min_leaf, std::uint64_t seed) {
  check_data(data);
  if (data.size() < 2) throw std::invalid_argument("random_forest_fit: need at least 2 samples");
  const auto rows = design_rows(data);
  const auto y = labels(data);
  const std::size_t n = rows.size();
  const int q = static_cast<int>(rows.front().size());
  const int mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(q))));

  Ensemble forest;
  forest.rule = Ensemble::Rule::average;
  forest.trees.reserve(n_trees);
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(mix_seed(seed, "rf-tree", static_cast<std::uint64_t>(t)));
    std::vector<int> boot(n);
    for (auto& i : boot) i = static_cast<int>(rng.below(n));
    forest.trees.push_back(grow_tree(rows, y, boot, max_depth, min_leaf, mtry, &rng));
  }
  return forest;
}

Ensemble gbm_fit(const std::vector<Triple>& data, int n_rounds, double shrinkage,
                 int max_depth) {
  check_data(data);
  const auto rows = design_rows(data);
  const auto y = labels(data);
  const std::size_t n = rows.size();

  Ensemble model;
  model.rule = Ensemble::Rule::boosted_sum;
  model.shrinkage = shrinkage;
  model.base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.base;
  const auto idx = all_indices(n);
  for (int r = 0; r < n_rounds; ++r) {
    RegressionTree tree = grow_tree(rows, residual, idx, max_depth, 1);
    for (std::size_t i = 0; i < n; ++i) residual[i] -= shrinkage * tree.predict(rows[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

InterpretableModel fit(const LearnerSpec& spec, const std::vector<Triple>& data) {
  spec.validate();
  check_data(data);
  InterpretableModel out;
  out.spec = spec;
  out.n_features = data.front().x.size() + 1;
  switch (spec.kind) {
    case LearnerKind::cart:
      out.model = cart_fit(data, spec.max_depth, spec.min_leaf);
      break;
    case LearnerKind::honest_tree:
      out.model = honest_tree_fit(data, spec.max_depth, spec.min_leaf, spec.seed);
      break;
    case LearnerKind::lasso:
      out.model = lasso_fit(data, spec.lambda);
      break;
    case LearnerKind::kernel_ridge:
      out.model = kernel_ridge_fit(data, spec.lambda, spec.kernel);
      break;
    case LearnerKind::random_forest:
      out.model = random_forest_fit(data, spec.n_trees, spec.max_depth, spec.min_leaf, spec.seed);
      break;
    case LearnerKind::gbm:
      out.model = gbm_fit(data, spec.n_rounds, spec.shrinkage, spec.max_depth);
      break;
  }
  return out;
}

namespace {

std::string feature_name(int f, const std::vector<std::string>& names) {
  if (f < static_cast<int>(names.size())) return names[f];
  return "z" + std::to_string(f);
}

void render_tree(const RegressionTree& tree, int node, int indent,
                 const std::vector<std::string>& names, std::ostringstream& out) {
  const auto& nd = tree.nodes[node];
  const std::string pad(2 * indent, ' ');
  if (nd.feature < 0) {
    out << pad << "leaf value=" << fmt_g(nd.value) << " n=" << nd.n_samples << "\n";
    return;
  }
  out << pad << feature_name(nd.feature, names) << " <= " << fmt_g(nd.threshold) << "\n";
  render_tree(tree, nd.left, indent + 1, names, out);
  out << pad << feature_name(nd.feature, names) << " > " << fmt_g(nd.threshold) << "\n";
  render_tree(tree, nd.right, indent + 1, names, out);
}

std::vector<std::string> default_names(std::size_t q) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j + 1 < q; ++j) names.push_back("x" + std::to_string(j));
  names.push_back("t");
  return names;
}

std::size_t model_n_features(const InterpretableModel& m) {
  if (const auto* tree = std::get_if<RegressionTree>(&m.model)) {
    std::size_t q = 1;
    for (const auto& nd : tree->nodes) {
      if (nd.feature >= 0) q = std::max(q, static_cast<std::size_t>(nd.feature) + 1);
    }
    return q;
  }
  if (const auto* lin = std::get_if<LinearModel>(&m.model)) return lin->coef.size();
  if (const auto* ker = std::get_if<KernelModel>(&m.model)) {
    return ker->support.empty() ? 1 : ker->support.front().size();
  }
  const auto& ens = std::get<Ensemble>(m.model);
  std::size_t q = 1;
  for (const auto& tree : ens.trees) {
    for (const auto& nd : tree.nodes) {
      if (nd.feature >= 0) q = std::max(q, static_cast<std::size_t>(nd.feature) + 1);
    }
  }
  return q;
}

}  // namespace

std::string render(const InterpretableModel& model, const std::vector<std::string>& names_in) {
  const std::size_t q = model.n_features > 0 ? model.n_features : model_n_features(model);
  std::vector<std::string> names = names_in.empty() ? default_names(q) : names_in;
  std::ostringstream out;
  out << model.spec.label() << "\n";
  if (const auto* tree = std::get_if<RegressionTree>(&model.model)) {
    render_tree(*tree, 0, 0, names, out);
  } else if (const auto* lin = std::get_if<LinearModel>(&model.model)) {
    out << "intercept = " << fmt_g(lin->intercept) << "\n";
    for (std::size_t j = 0; j < lin->coef.size(); ++j) {
      if (lin->coef[j] != 0.0) {
        out << feature_name(static_cast<int>(j), names) << " : " << fmt_g(lin->coef[j]) << "\n";
      }
    }
  } else if (const auto* ker = std::get_if<KernelModel>(&model.model)) {
    out << ker->kernel.name() << " kernel, " << ker->support.size()
        << " support points, lambda = " << fmt_g(ker->lambda) << "\n";
  } else {
    const auto& ens = std::get<Ensemble>(model.model);
    out << ens.trees.size() << " trees\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(ens.trees.size(), 2); ++i) {
      out << "tree " << i << ":\n";
      render_tree(ens.trees[i], 0, 1, names, out);
    }
  }
  return out.str();
}

void to_json(nlohmann::json& j, const Kernel& k) {
  j = nlohmann::json{{"kind", k.name()}, {"bandwidth", k.bandwidth}};
}

void from_json(const nlohmann::json& j, Kernel& k) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    k = Kernel::linear();
  } else if (kind == "rbf") {
    k = Kernel::rbf(j.at("bandwidth").get<double>());
  } else {
    throw std::invalid_argument("unknown kernel kind: " + kind);
  }
}

namespace {

const char* kind_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::cart: return "cart";
    case LearnerKind::honest_tree: return "honest_tree";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::kernel_ridge: return "kernel_ridge";
    case LearnerKind::random_forest: return "random_forest";
    case LearnerKind::gbm: return "gbm";
  }
  return "unknown";
}

LearnerKind kind_from_name(const std::string& name) {
  if (name == "cart") return LearnerKind::cart;
  if (name == "honest_tree") return LearnerKind::honest_tree;
  if (name == "lasso") return LearnerKind::lasso;
  if (name == "kernel_ridge") return LearnerKind::kernel_ridge;
  if (name == "random_forest") return LearnerKind::random_forest;
  if (name == "gbm") return LearnerKind::gbm;
  throw std::invalid_argument("unknown learner kind: " + name);
}

}  // namespace

void to_json(nlohmann::json& j, const LearnerSpec& spec) {
  j = nlohmann::json{{"kind", kind_name(spec.kind)},
                     {"max_depth", spec.max_depth},
                     {"min_leaf", spec.min_leaf},
                     {"lambda", spec.lambda},
                     {"kernel", spec.kernel},
                     {"n_trees", spec.n_trees},
                     {"n_rounds", spec.n_rounds},
                     {"shrinkage", spec.shrinkage},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, LearnerSpec& spec) {
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("max_depth")) spec.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_leaf")) spec.min_leaf = j.at("min_leaf").get<int>();
  if (j.contains("lambda")) spec.lambda = j.at("lambda").get<double>();
  if (j.contains("kernel")) spec.kernel = j.at("kernel").get<Kernel>();
  if (j.contains("n_trees")) spec.n_trees = j.at("n_trees").get<int>();
  if (j.contains("n_rounds")) spec.n_rounds = j.at("n_rounds").get<int>();
  if (j.contains("shrinkage")) spec.shrinkage = j.at("shrinkage").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
}

namespace {

nlohmann::json tree_to_json(const RegressionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    nodes.push_back({{"feature", nd.feature},
                     {"threshold", nd.threshold},
                     {"left", nd.left},
                     {"right", nd.right},
                     {"value", nd.value},
                     {"n", nd.n_samples}});
  }
  return nlohmann::json{{"nodes", nodes}};
}

RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree tree;
  for (const auto& nd : j.at("nodes")) {
    TreeNode node;
    node.feature = nd.at("feature").get<int>();
    node.threshold = nd.at("threshold").get<double>();
    node.left = nd.at("left").get<int>();
    node.right = nd.at("right").get<int>();
    node.value = nd.at("value").get<double>();
    node.n_samples = nd.at("n").get<int>();
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

nlohmann::json model_to_json(const InterpretableModel& model) {
  nlohmann::json j;
  j["spec"] = model.spec;
  j["n_features"] = model.n_features;
  if (const auto* tree = std::get_if<RegressionTree>(&model.model)) {
    j["type"] = "tree";
    j["tree"] = tree_to_json(*tree);
  } else if (const auto* lin = std::get_if<LinearModel>(&model.model)) {
    j["type"] = "linear";
    j["linear"] = {{"intercept", lin->intercept},
                   {"coef", lin->coef},
                   {"mean", lin->mean},
                   {"scale", lin->scale}};
  } else if (const auto* ker = std::get_if<KernelModel>(&model.model)) {
    j["type"] = "kernel";
    j["kernel_model"] = {{"support", ker->support},
                         {"alpha", ker->alpha},
                         {"kernel", ker->kernel},
                         {"lambda", ker->lambda},
                         {"y_mean", ker->y_mean}};
  } else {
    const auto& ens = std::get<Ensemble>(model.model);
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : ens.trees) trees.push_back(tree_to_json(tree));
    j["type"] = "ensemble";
    j["ensemble"] = {{"rule", ens.rule == Ensemble::Rule::average ? "average" : "boosted_sum"},
                     {"base", ens.base},
                     {"shrinkage", ens.shrinkage},
                     {"trees", trees}};
  }
  return j;
}

InterpretableModel model_from_json(const nlohmann::json& j) {
  InterpretableModel model;
  model.spec = j.at("spec").get<LearnerSpec>();
  if (j.contains("n_features")) model.n_features = j.at("n_features").get<std::size_t>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "tree") {
    model.model = tree_from_json(j.at("tree"));
  } else if (type == "linear") {
    const auto& lj = j.at("linear");
    LinearModel lin;
    lin.intercept = lj.at("intercept").get<double>();
    lin.coef = lj.at("coef").get<std::vector<double>>();
    lin.mean = lj.at("mean").get<std::vector<double>>();
    lin.scale = lj.at("scale").get<std::vector<double>>();
    model.model = std::move(lin);
  } else if (type == "kernel") {
    const auto& kj = j.at("kernel_model");
    KernelModel ker;
    ker.support = kj.at("support").get<std::vector<std::vector<double>>>();
    ker.alpha = kj.at("alpha").get<std::vector<double>>();
    ker.kernel = kj.at("kernel").get<Kernel>();
    ker.lambda = kj.at("lambda").get<double>();
    ker.y_mean = kj.at("y_mean").get<double>();
    model.model = std::move(ker);
  } else if (type == "ensemble") {
    const auto& ej = j.at("ensemble");
    Ensemble ens;
    ens.rule = ej.at("rule").get<std::string>() == "average" ? Ensemble::Rule::average
                                                             : Ensemble::Rule::boosted_sum;
    ens.base = ej.at("base").get<double>();
    ens.shrinkage = ej.at("shrinkage").get<double>();
    for (const auto& tj : ej.at("trees")) ens.trees.push_back(tree_from_json(tj));
    model.model = std::move(ens);
  } else {
    throw std::invalid_argument("unknown model type: " + type);
  }
  return model;
}

void save_model(const InterpretableModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

InterpretableModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open model file: " + path);
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace ite
