#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "ite/dataset.hpp"
#include "ite/rng.hpp"

using namespace ite;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

ObservationalDataset tiny_dataset(std::size_t n, std::uint64_t seed, bool with_optionals) {
  Rng rng(seed);
  ObservationalDataset ds;
  ds.d = 3;
  ds.name = "tiny";
  for (std::size_t i = 0; i < n; ++i) {
    Unit u;
    u.x = {rng.normal(), rng.normal(), rng.normal()};
    u.t = rng.bernoulli(0.5);
    u.y_factual = rng.normal();
    if (with_optionals) {
      u.y_counterfactual = rng.normal();
      u.mu0 = rng.normal();
      u.mu1 = rng.normal();
      u.randomized_flag = rng.bernoulli(0.5) == 1;
    }
    ds.units.push_back(std::move(u));
  }
  return ds;
}

std::multiset<std::string> unit_keys(const ObservationalDataset& ds) {
  std::multiset<std::string> keys;
  for (const auto& u : ds.units) {
    std::string k;
    for (double v : u.x) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g|", v);
      k += buf;
    }
    k += std::to_string(u.t) + "|" + std::to_string(u.y_factual);
    keys.insert(k);
  }
  return keys;
}

}  // namespace

TEST_CASE("load_dataset parses a simple csv") {
  const std::string path = temp_file("ite_test_simple.csv");
  write_file(path, "x0,x1,t,y\n0.1,0.2,1,3.5\n0.0,1.0,0,1.0\n");
  CsvSchema schema;
  const auto ds = load_dataset(path, schema);
  CHECK(ds.size() == 2);
  CHECK(ds.d == 2);
  CHECK(ds.units[0].x[0] == doctest::Approx(0.1));
  CHECK(ds.units[0].t == 1);
  CHECK(ds.units[1].y_factual == doctest::Approx(1.0));
  CHECK_FALSE(ds.units[0].mu0.has_value());
}

TEST_CASE("load_dataset error paths") {
  CsvSchema schema;
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_dataset("/nonexistent/nope.csv", schema),
                         doctest::Contains("cannot open"), std::runtime_error);
  }
  SUBCASE("no data rows") {
    const std::string path = temp_file("ite_test_empty.csv");
    write_file(path, "x0,t,y\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, schema), doctest::Contains("no data rows"),
                         std::runtime_error);
  }
  SUBCASE("treatment not binary") {
    const std::string path = temp_file("ite_test_badt.csv");
    write_file(path, "x0,t,y\n1.0,2,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, schema), doctest::Contains("treatment not binary"),
                         std::runtime_error);
  }
  SUBCASE("non-numeric cell") {
    const std::string path = temp_file("ite_test_nan.csv");
    write_file(path, "x0,t,y\nabc,1,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, schema), doctest::Contains("non-numeric cell"),
                         std::runtime_error);
  }
  SUBCASE("ragged rows") {
    const std::string path = temp_file("ite_test_ragged.csv");
    write_file(path, "x0,x1,t,y\n1.0,1,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(path, schema), doctest::Contains("ragged row"),
                         std::runtime_error);
  }
}

TEST_CASE("explicit x columns and optional columns by name") {
  const std::string path = temp_file("ite_test_named.csv");
  write_file(path, "id,w,z,arm,out,truth0,truth1\n9,0.5,-1.0,1,2.0,1.0,3.0\n");
  CsvSchema schema;
  schema.x_cols = {"w", "z"};
  schema.t_col = "arm";
  schema.y_col = "out";
  schema.mu0_col = "truth0";
  schema.mu1_col = "truth1";
  const auto ds = load_dataset(path, schema);
  CHECK(ds.d == 2);
  CHECK(ds.units[0].x[1] == doctest::Approx(-1.0));
  CHECK(*ds.units[0].mu0 == doctest::Approx(1.0));
  CHECK(*ds.units[0].mu1 == doctest::Approx(3.0));
}

TEST_CASE("save then load is the identity") {
  for (bool optionals : {false, true}) {
    CAPTURE(optionals);
    const auto ds = tiny_dataset(17, 42, optionals);
    const std::string path = temp_file("ite_test_roundtrip.csv");
    save_dataset(ds, path);
    const auto back = load_dataset(path, CsvSchema::canonical());
    REQUIRE(back.size() == ds.size());
    CHECK(back.d == ds.d);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::size_t j = 0; j < ds.d; ++j) CHECK(back.units[i].x[j] == ds.units[i].x[j]);
      CHECK(back.units[i].t == ds.units[i].t);
      CHECK(back.units[i].y_factual == ds.units[i].y_factual);
      CHECK(back.units[i].mu0 == ds.units[i].mu0);
      CHECK(back.units[i].mu1 == ds.units[i].mu1);
      CHECK(back.units[i].y_counterfactual == ds.units[i].y_counterfactual);
      CHECK(back.units[i].randomized_flag == ds.units[i].randomized_flag);
    }
  }
}

TEST_CASE("split produces the documented block sizes") {
  const auto ds = tiny_dataset(100, 7, false);
  SplitSpec spec;
  spec.train = 0.63;
  spec.validation = 0.27;
  spec.test = 0.10;
  spec.seed = 11;
  const auto parts = split(ds, spec);
  CHECK(parts.train.size() == 63);
  CHECK(parts.validation.size() == 27);
  CHECK(parts.test.size() == 10);
}

TEST_CASE("split is a partition of the input multiset") {
  const auto ds = tiny_dataset(53, 3, false);
  SplitSpec spec;
  spec.seed = 5;
  const auto parts = split(ds, spec);
  auto merged = unit_keys(parts.train);
  for (const auto& k : unit_keys(parts.validation)) merged.insert(k);
  for (const auto& k : unit_keys(parts.test)) merged.insert(k);
  CHECK(merged == unit_keys(ds));
}

TEST_CASE("split determinism") {
  const auto ds = tiny_dataset(40, 9, true);
  SplitSpec spec;
  spec.seed = 123;
  const auto a = split(ds, spec);
  const auto b = split(ds, spec);
  const std::string pa = temp_file("ite_split_a.csv");
  const std::string pb = temp_file("ite_split_b.csv");
  save_dataset(a.train, pa);
  save_dataset(b.train, pb);
  std::ifstream fa(pa), fb(pb);
  const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
}

TEST_CASE("split rejects empty blocks and bad fractions") {
  const auto ds = tiny_dataset(10, 2, false);
  SplitSpec spec;
  spec.train = 0.5;
  spec.validation = 0.5;
  spec.test = 0.0;
  CHECK_THROWS_WITH_AS(split(ds, spec), doctest::Contains("empty test block"),
                       std::runtime_error);
  spec.test = 0.2;
  CHECK_THROWS_AS(split(ds, spec), std::invalid_argument);  // fractions sum to 1.2
}

TEST_CASE("empirical_covariates preserves order and duplicates") {
  ObservationalDataset ds;
  ds.d = 2;
  ds.units.push_back({{1.0, 2.0}, 0, 0.0, {}, {}, {}, {}});
  SUBCASE("single unit") {
    const auto xs = empirical_covariates(ds);
    REQUIRE(xs.size() == 1);
    CHECK(xs[0] == std::vector<double>{1.0, 2.0});
  }
  SUBCASE("duplicates kept") {
    ds.units.push_back({{1.0, 2.0}, 1, 1.0, {}, {}, {}, {}});
    ds.units.push_back({{3.0, 4.0}, 0, 2.0, {}, {}, {}, {}});
    const auto xs = empirical_covariates(ds);
    REQUIRE(xs.size() == 3);
    CHECK(xs[0] == xs[1]);
    CHECK(xs[2] == std::vector<double>{3.0, 4.0});
  }
}
