#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ite {

// One observational unit: covariates, binary treatment, factual outcome,
// and (for synthetic data) the counterfactual draw and true surfaces
// mu0(x) = E[Y0|x], mu1(x) = E[Y1|x].
struct Unit {
  std::vector<double> x;
  int t = 0;
  double y_factual = 0.0;
  std::optional<double> y_counterfactual;
  std::optional<double> mu0;
  std::optional<double> mu1;
  std::optional<bool> randomized_flag;
};

struct ObservationalDataset {
  std::vector<Unit> units;
  std::size_t d = 0;
  std::string name;

  std::size_t size() const { return units.size(); }
  std::size_t count_arm(int t) const;
  bool has_ground_truth() const;    // every unit carries mu0 and mu1
  bool has_counterfactual() const;
  bool has_randomized_flag() const;
  bool outcomes_binary() const;     // every y_factual in {0, 1}
};

// A labeled (x, t, y) triple, the currency of every learner.
struct Triple {
  std::vector<double> x;
  int t = 0;
  double y = 0.0;
};

// The factual rows of a dataset as learner input.
std::vector<Triple> factual_triples(const ObservationalDataset& ds);

struct SplitSpec {
  double train = 0.63;
  double validation = 0.27;
  double test = 0.10;
  std::uint64_t seed = 0;

  void validate() const;  // throws on bad fractions
};

struct DataSplit {
  ObservationalDataset train;
  ObservationalDataset validation;
  ObservationalDataset test;
};

// Column-name mapping for CSV ingestion. An empty x_cols means "every
// header column not otherwise mapped, in header order". Optional columns
// are used when present in the header and ignored otherwise.
struct CsvSchema {
  std::vector<std::string> x_cols;
  std::string t_col = "t";
  std::string y_col = "y";
  std::optional<std::string> y_cf_col;
  std::optional<std::string> mu0_col;
  std::optional<std::string> mu1_col;
  std::optional<std::string> randomized_col;

  // Matches what save_dataset emits.
  static CsvSchema canonical();
};

ObservationalDataset load_dataset(const std::string& path, const CsvSchema& schema);

// Writes x0..x{d-1},t,y plus any optional column carried by every unit.
// Floating-point cells use 17 significant digits so load(save(ds)) == ds.
void save_dataset(const ObservationalDataset& ds, const std::string& path);

// Seeded uniform permutation, then contiguous blocks of round(f*N) rows;
// the test block absorbs the rounding remainder.
DataSplit split(const ObservationalDataset& ds, const SplitSpec& spec);

// Covariates of every unit, in row order, duplicates included.
std::vector<std::vector<double>> empirical_covariates(const ObservationalDataset& ds);

}  // namespace ite
