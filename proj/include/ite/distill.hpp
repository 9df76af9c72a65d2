#pragma once

#include <vector>

#include "ite/dataset.hpp"
#include "ite/learners.hpp"
#include "ite/predictor.hpp"

namespace ite {

// The RCT-shaped pair set: every factual covariate paired with both
// treatment arms, so the empirical treatment marginal is exactly 1/2.
struct PairSet {
  struct Pair {
    std::vector<double> x;
    int t = 0;
  };
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  std::size_t count_arm(int t) const;
};

struct DistilledDataset {
  std::vector<Triple> triples;
};

// Factual block (x_i, t_i) in row order, then the counterfactual block
// (x_i, 1 - t_i) in row order.
PairSet build_rct_pairs(const ObservationalDataset& factual);

// y = f_star(x, t) for every pair, order preserved. No noise is added.
DistilledDataset label_with_oracle(const PairSet& pairs, const Predictor& f_star);

// Pair construction, oracle labeling, then the interpretable fit.
InterpretableModel distill(const ObservationalDataset& factual, const Predictor& f_star,
                           const LearnerSpec& spec);

// Mean squared gap between f and f_star over the pair set; the RCT
// weighting is realized by the pair construction itself.
double relative_error(const Predictor& f, const Predictor& f_star, const PairSet& pairs);

// Same learner fit on the factual triples only.
InterpretableModel fit_baseline(const ObservationalDataset& factual, const LearnerSpec& spec);

// CSV reuse: distilled triples as a dataset (no ground-truth columns).
ObservationalDataset to_dataset(const DistilledDataset& distilled, const std::string& name);

}  // namespace ite
