#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "llp/dataset.hpp"
#include "llp/metrics.hpp"

using namespace llp;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_csv parses features and labels") {
  const auto path = write_temp("ds_basic.csv", "f1,f2,y\n1.5,2,1\n-3,0.25,0\n0,0,1\n");
  const LabeledDataset ds = load_csv(path, "y");
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  REQUIRE(ds.labels.has_value());
  CHECK((*ds.labels)[0] == 1);
  CHECK((*ds.labels)[1] == 0);
  CHECK(ds.features.at(0, 0) == 1.5);
  CHECK(ds.features.at(1, 1) == 0.25);

  const LabeledDataset no_labels = load_csv(path);
  CHECK(no_labels.dim() == 3);
  CHECK_FALSE(no_labels.labels.has_value());
}

TEST_CASE("load_csv error cases name the offending cell") {
  const auto bad_cell = write_temp("ds_bad.csv", "f1,f2\n1,2\n3,abc\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_cell), doctest::Contains("row 3"), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_csv(bad_cell), doctest::Contains("f2"), std::runtime_error);

  const auto bad_label = write_temp("ds_badlabel.csv", "f1,y\n1,2\n");
  CHECK_THROWS_AS(load_csv(bad_label, "y"), std::runtime_error);

  const auto ragged = write_temp("ds_ragged.csv", "f1,f2\n1,2\n3\n");
  CHECK_THROWS_AS(load_csv(ragged), std::runtime_error);

  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), std::runtime_error);
}

TEST_CASE("csv round trip preserves values exactly") {
  LabeledDataset ds = make_synthetic(50, 3, 2.5, 99);
  const auto path = write_temp("ds_roundtrip.csv", "");
  save_csv(ds, path, "y");
  const LabeledDataset back = load_csv(path, "y");
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) CHECK(back.features.at(i, j) == ds.features.at(i, j));
    CHECK((*back.labels)[i] == (*ds.labels)[i]);
  }
}

TEST_CASE("make_synthetic is deterministic and shaped correctly") {
  const LabeledDataset a = make_synthetic(101, 4, 3.0, 7);
  const LabeledDataset b = make_synthetic(101, 4, 3.0, 7);
  CHECK(a.features.data == b.features.data);
  CHECK(*a.labels == *b.labels);
  CHECK(a.size() == 101);
  CHECK(a.dim() == 4);
  std::size_t positives = 0;
  for (int l : *a.labels) positives += l;
  CHECK(positives == 101 / 2);
  CHECK(a.features.all_finite());

  const LabeledDataset c = make_synthetic(101, 4, 3.0, 8);
  CHECK(a.features.data != c.features.data);

  CHECK_THROWS_AS(make_synthetic(1, 2, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic(10, 0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("make_synthetic with zero separation carries no label signal") {
  const LabeledDataset ds = make_synthetic(4000, 2, 0.0, 3);
  std::vector<double> score(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) score[i] = ds.features.at(i, 0);
  CHECK(auroc(score, *ds.labels) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("split produces the requested sizes deterministically") {
  const LabeledDataset ds = make_synthetic(10, 2, 1.0, 1);
  const DataSplit s = split(ds, 0.8, 0.1, 0.1, 42);
  CHECK(s.train_indices.size() == 8);
  CHECK(s.validation_indices.size() == 1);
  CHECK(s.test_indices.size() == 1);

  const DataSplit s2 = split(ds, 0.8, 0.1, 0.1, 42);
  CHECK(s.train_indices == s2.train_indices);
  CHECK(s.test_indices == s2.test_indices);

  CHECK_THROWS_AS(split(ds, 0.7, 0.1, 0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.8, 0.1, -0.1, 0), std::invalid_argument);
}

TEST_CASE("split is a partition: disjoint, in range, no duplicates") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 37 + seed * 13;
    const LabeledDataset ds = make_synthetic(m, 2, 1.0, seed);
    const DataSplit s = split(ds, 0.6, 0.2, 0.2, seed);
    std::set<std::size_t> seen;
    for (const auto* part : {&s.train_indices, &s.validation_indices, &s.test_indices})
      for (std::size_t idx : *part) {
        CHECK(idx < m);
        CHECK(seen.insert(idx).second);  // no index appears twice
      }
    CHECK(seen.size() == m);
  }
}

TEST_CASE("standardize_columns centers and scales") {
  LabeledDataset ds = make_synthetic(500, 3, 4.0, 11);
  standardize_columns(ds.features);
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) mean += ds.features.at(i, j);
    mean /= static_cast<double>(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double c = ds.features.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(ds.size());
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
}
