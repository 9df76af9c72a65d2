#include "ite/distill.hpp"

#include <stdexcept>
#include <string>

namespace ite {

std::size_t PairSet::count_arm(int t) const {
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (p.t == t) ++n;
  }
  return n;
}

PairSet build_rct_pairs(const ObservationalDataset& factual) {
  if (factual.units.empty()) throw std::invalid_argument("build_rct_pairs: empty dataset");
  PairSet out;
  out.pairs.reserve(2 * factual.size());
  for (const auto& u : factual.units) out.pairs.push_back({u.x, u.t});
  for (const auto& u : factual.units) out.pairs.push_back({u.x, 1 - u.t});
  return out;
}

DistilledDataset label_with_oracle(const PairSet& pairs, const Predictor& f_star) {
  DistilledDataset out;
  out.triples.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    const auto& p = pairs.pairs[i];
    double y;
    try {
      y = f_star.predict(p.x, p.t);
    } catch (const std::exception& e) {
      throw std::runtime_error("oracle evaluation failed on pair " + std::to_string(i) + ": " +
                               e.what());
    }
    out.triples.push_back({p.x, p.t, y});
  }
  return out;
}

InterpretableModel distill(const ObservationalDataset& factual, const Predictor& f_star,
                           const LearnerSpec& spec) {
  return fit(spec, label_with_oracle(build_rct_pairs(factual), f_star).triples);
}

double relative_error(const Predictor& f, const Predictor& f_star, const PairSet& pairs) {
  if (pairs.pairs.empty()) throw std::invalid_argument("relative_error: empty pair set");
  double s = 0.0;
  for (const auto& p : pairs.pairs) {
    const double diff = f.predict(p.x, p.t) - f_star.predict(p.x, p.t);
    s += diff * diff;
  }
  return s / static_cast<double>(pairs.size());
}

InterpretableModel fit_baseline(const ObservationalDataset& factual, const LearnerSpec& spec) {
  if (factual.units.empty()) throw std::invalid_argument("fit_baseline: empty dataset");
  return fit(spec, factual_triples(factual));
}

ObservationalDataset to_dataset(const DistilledDataset& distilled, const std::string& name) {
  ObservationalDataset ds;
  ds.name = name;
  ds.d = distilled.triples.empty() ? 0 : distilled.triples.front().x.size();
  ds.units.reserve(distilled.triples.size());
  for (const auto& tr : distilled.triples) {
    Unit u;
    u.x = tr.x;
    u.t = tr.t;
    u.y_factual = tr.y;
    ds.units.push_back(std::move(u));
  }
  return ds;
}

}  // namespace ite
