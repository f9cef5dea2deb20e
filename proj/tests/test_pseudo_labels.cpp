#include <filesystem>

#include "doctest.h"
#include "llp/pseudo_labels.hpp"

using namespace llp;

TEST_CASE("hard thresholding") {
  MarginalVector m;
  m.probs = {0.9, 0.2};
  const PseudoLabelSet pl = threshold(m, 0.5);
  CHECK(pl.hard == std::vector<int>{1, 0});
  CHECK(pl.soft == m.probs);
  CHECK(pl.weights.empty());
}

TEST_CASE("a marginal exactly at tau stays 0") {
  MarginalVector m;
  m.probs = {0.5, 0.5000001};
  const PseudoLabelSet pl = threshold(m, 0.5);
  CHECK(pl.hard == std::vector<int>{0, 1});
}

TEST_CASE("small tuned thresholds fire on small marginals") {
  MarginalVector m;
  m.probs = {0.05, 0.01};
  const PseudoLabelSet pl = threshold(m, 0.03558);
  CHECK(pl.hard == std::vector<int>{1, 0});
}

TEST_CASE("tau bounds are validated") {
  MarginalVector m;
  m.probs = {0.5};
  CHECK_THROWS_AS(threshold(m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold(m, 1.0), std::invalid_argument);
}

TEST_CASE("soft mode keeps marginals, soft_weighted fills |p - tau|") {
  MarginalVector m;
  m.probs = {0.9, 0.2, 0.35};
  const PseudoLabelSet soft = threshold(m, 0.35, ThresholdMode::Soft);
  CHECK(soft.weights.empty());
  CHECK(soft.soft == m.probs);

  const PseudoLabelSet weighted = threshold(m, 0.35, ThresholdMode::SoftWeighted);
  REQUIRE(weighted.weights.size() == 3);
  CHECK(weighted.weights[0] == doctest::Approx(0.55));
  CHECK(weighted.weights[1] == doctest::Approx(0.15));
  CHECK(weighted.weights[2] == doctest::Approx(0.0));
  // the weight only depends on |p - tau|
  CHECK(weighted.weights[0] == doctest::Approx(std::abs(m.probs[0] - 0.35)));
}

TEST_CASE("raising tau never turns a 0 into a 1") {
  MarginalVector m;
  for (int i = 0; i <= 100; ++i) m.probs.push_back(i / 100.0);
  std::vector<int> prev(m.probs.size(), 1);
  for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const PseudoLabelSet pl = threshold(m, tau);
    for (std::size_t i = 0; i < prev.size(); ++i) CHECK(pl.hard[i] <= prev[i]);
    prev = pl.hard;
  }
}

TEST_CASE("pseudo label auroc endpoints") {
  MarginalVector m;
  m.probs = {1.0, 0.0, 1.0, 0.0};
  const std::vector<int> labels{1, 0, 1, 0};
  CHECK(pseudo_label_auroc(m, labels) == doctest::Approx(1.0));

  MarginalVector inverted;
  for (double p : m.probs) inverted.probs.push_back(1.0 - p);
  CHECK(pseudo_label_auroc(inverted, labels) == doctest::Approx(0.0));

  const std::vector<int> single(4, 1);
  CHECK_THROWS_AS(pseudo_label_auroc(m, single), std::invalid_argument);
}

TEST_CASE("pseudo label csv dump") {
  MarginalVector m;
  m.probs = {0.9, 0.1};
  const PseudoLabelSet pl = threshold(m, 0.5, ThresholdMode::SoftWeighted);
  const auto path = (std::filesystem::temp_directory_path() / "pl_dump.csv").string();
  save_pseudo_labels_csv(pl, path);
  CHECK(std::filesystem::exists(path));
}
