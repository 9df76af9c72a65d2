#include "ite/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ite/rng.hpp"

namespace ite {

std::size_t ObservationalDataset::count_arm(int t) const {
  std::size_t n = 0;
  for (const auto& u : units) {
    if (u.t == t) ++n;
  }
  return n;
}

bool ObservationalDataset::has_ground_truth() const {
  if (units.empty()) return false;
  return std::all_of(units.begin(), units.end(),
                     [](const Unit& u) { return u.mu0.has_value() && u.mu1.has_value(); });
}

bool ObservationalDataset::has_counterfactual() const {
  if (units.empty()) return false;
  return std::all_of(units.begin(), units.end(),
                     [](const Unit& u) { return u.y_counterfactual.has_value(); });
}

bool ObservationalDataset::has_randomized_flag() const {
  if (units.empty()) return false;
  return std::all_of(units.begin(), units.end(),
                     [](const Unit& u) { return u.randomized_flag.has_value(); });
}

bool ObservationalDataset::outcomes_binary() const {
  return std::all_of(units.begin(), units.end(),
                     [](const Unit& u) { return u.y_factual == 0.0 || u.y_factual == 1.0; });
}

std::vector<Triple> factual_triples(const ObservationalDataset& ds) {
  std::vector<Triple> out;
  out.reserve(ds.size());
  for (const auto& u : ds.units) {
    out.push_back(Triple{u.x, u.t, u.y_factual});
  }
  return out;
}

void SplitSpec::validate() const {
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(train) || !in_unit(validation) || !in_unit(test)) {
    throw std::invalid_argument("split fractions must lie in [0,1]");
  }
  if (std::fabs(train + validation + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

CsvSchema CsvSchema::canonical() {
  CsvSchema s;
  s.t_col = "t";
  s.y_col = "y";
  s.y_cf_col = "y_cf";
  s.mu0_col = "mu0";
  s.mu1_col = "mu1";
  s.randomized_col = "randomized";
  return s;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(cell, &pos);
    while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\r')) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("non-numeric cell at data row " + std::to_string(row) +
                             ", column '" + col + "': '" + cell + "'");
  }
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ObservationalDataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open dataset file: " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("no data rows in " + path);
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  std::vector<std::string> header = split_line(header_line);

  auto find_col = [&header](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };

  int t_idx = find_col(schema.t_col);
  int y_idx = find_col(schema.y_col);
  if (t_idx < 0) throw std::runtime_error("treatment column '" + schema.t_col + "' not in header");
  if (y_idx < 0) throw std::runtime_error("outcome column '" + schema.y_col + "' not in header");

  auto optional_col = [&](const std::optional<std::string>& name) -> int {
    return name ? find_col(*name) : -1;
  };
  int ycf_idx = optional_col(schema.y_cf_col);
  int mu0_idx = optional_col(schema.mu0_col);
  int mu1_idx = optional_col(schema.mu1_col);
  int rand_idx = optional_col(schema.randomized_col);

  std::vector<int> x_idx;
  if (schema.x_cols.empty()) {
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
      if (i == t_idx || i == y_idx || i == ycf_idx || i == mu0_idx || i == mu1_idx ||
          i == rand_idx)
        continue;
      x_idx.push_back(i);
    }
  } else {
    for (const auto& name : schema.x_cols) {
      int idx = find_col(name);
      if (idx < 0) throw std::runtime_error("covariate column '" + name + "' not in header");
      x_idx.push_back(idx);
    }
  }

  ObservationalDataset ds;
  ds.d = x_idx.size();
  ds.name = path;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("ragged row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    }
    Unit u;
    u.x.reserve(ds.d);
    for (int idx : x_idx) u.x.push_back(parse_cell(cells[idx], row, header[idx]));
    double t_val = parse_cell(cells[t_idx], row, header[t_idx]);
    if (t_val != 0.0 && t_val != 1.0) {
      throw std::runtime_error("treatment not binary at data row " + std::to_string(row));
    }
    u.t = static_cast<int>(t_val);
    u.y_factual = parse_cell(cells[y_idx], row, header[y_idx]);
    if (ycf_idx >= 0) u.y_counterfactual = parse_cell(cells[ycf_idx], row, header[ycf_idx]);
    if (mu0_idx >= 0) u.mu0 = parse_cell(cells[mu0_idx], row, header[mu0_idx]);
    if (mu1_idx >= 0) u.mu1 = parse_cell(cells[mu1_idx], row, header[mu1_idx]);
    if (rand_idx >= 0) {
      double r = parse_cell(cells[rand_idx], row, header[rand_idx]);
      if (r != 0.0 && r != 1.0) {
        throw std::runtime_error("randomized flag not binary at data row " + std::to_string(row));
      }
      u.randomized_flag = (r == 1.0);
    }
    ds.units.push_back(std::move(u));
  }

  if (ds.units.empty()) throw std::runtime_error("no data rows in " + path);
  return ds;
}

void save_dataset(const ObservationalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) throw std::runtime_error("cannot write dataset file: " + path);

  bool with_ycf = ds.has_counterfactual();
  bool with_mu = ds.has_ground_truth();
  bool with_rand = ds.has_randomized_flag();

  for (std::size_t j = 0; j < ds.d; ++j) out << "x" << j << ",";
  out << "t,y";
  if (with_ycf) out << ",y_cf";
  if (with_mu) out << ",mu0,mu1";
  if (with_rand) out << ",randomized";
  out << "\n";

  for (const auto& u : ds.units) {
    for (std::size_t j = 0; j < ds.d; ++j) out << format_value(u.x[j]) << ",";
    out << u.t << "," << format_value(u.y_factual);
    if (with_ycf) out << "," << format_value(*u.y_counterfactual);
    if (with_mu) out << "," << format_value(*u.mu0) << "," << format_value(*u.mu1);
    if (with_rand) out << "," << (*u.randomized_flag ? 1 : 0);
    out << "\n";
  }
}

namespace {

// round half away from zero
std::size_t round_block(double v) {
  return static_cast<std::size_t>(std::llround(v));
}

}  // namespace

DataSplit split(const ObservationalDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.size();
  if (n < 3) throw std::invalid_argument("split needs at least 3 units");

  const std::size_t n_train = round_block(spec.train * static_cast<double>(n));
  const std::size_t n_valid = round_block(spec.validation * static_cast<double>(n));
  if (n_train == 0) throw std::runtime_error("empty train block");
  if (n_valid == 0) throw std::runtime_error("empty validation block");
  if (n_train + n_valid >= n) throw std::runtime_error("empty test block");
  const std::size_t n_test = n - n_train - n_valid;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  auto take = [&](std::size_t begin, std::size_t count, const char* tag) {
    ObservationalDataset part;
    part.d = ds.d;
    part.name = ds.name + "/" + tag;
    part.units.reserve(count);
    for (std::size_t i = 0; i < count; ++i) part.units.push_back(ds.units[order[begin + i]]);
    return part;
  };

  DataSplit out;
  out.train = take(0, n_train, "train");
  out.validation = take(n_train, n_valid, "validation");
  out.test = take(n_train + n_valid, n_test, "test");
  return out;
}

std::vector<std::vector<double>> empirical_covariates(const ObservationalDataset& ds) {
  if (ds.units.empty()) throw std::invalid_argument("empirical_covariates: empty dataset");
  std::vector<std::vector<double>> xs;
  xs.reserve(ds.size());
  for (const auto& u : ds.units) xs.push_back(u.x);
  return xs;
}

}  // namespace ite
