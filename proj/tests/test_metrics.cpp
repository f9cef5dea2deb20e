#include <random>
#include <stdexcept>

#include "doctest.h"
#include "llp/knn_graph.hpp"
#include "llp/metrics.hpp"

using namespace llp;

namespace {

// Quadratic-time oracle: concordant pairs plus half the ties.
double auroc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auroc hand examples") {
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) ==
        doctest::Approx(1.0));
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) ==
        doctest::Approx(0.5));
  // concordant pairs counted by hand: 4 of 4
  CHECK(auroc(std::vector<double>{0.3, 0.7, 0.5, 0.2}, std::vector<int>{0, 1, 1, 0}) ==
        doctest::Approx(1.0));
  // a perfect inversion
  CHECK(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == doctest::Approx(0.0));
}

TEST_CASE("auroc rejects degenerate input") {
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}),
                  std::invalid_argument);
}

TEST_CASE("auroc matches the brute-force pair count, ties included") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> bucket(0, 9);  // coarse scores force ties
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      scores.push_back(bucket(rng) / 10.0);
      labels.push_back(coin(rng));
    }
    labels[0] = 0;
    labels[1] = 1;
    CHECK(auroc(scores, labels) == doctest::Approx(auroc_bruteforce(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("knn label score") {
  NeighborGraph g;
  g.k = 1;
  g.neighbors = {{1}, {0}, {1}};
  g.distances = {{1.0}, {1.0}, {1.0}};

  CHECK(knn_label_score(g, std::vector<int>{1, 1, 1}) == doctest::Approx(1.0));
  CHECK(knn_label_score(g, std::vector<int>{0, 0, 0}) == doctest::Approx(1.0));
  // every 1-NN vote disagrees
  CHECK(knn_label_score(g, std::vector<int>{1, 0, 1}) == doctest::Approx(0.0));

  // an isolated node is excluded from the denominator
  NeighborGraph with_isolated = g;
  with_isolated.neighbors.push_back({});
  with_isolated.distances.push_back({});
  CHECK(knn_label_score(with_isolated, std::vector<int>{1, 1, 1, 0}) == doctest::Approx(1.0));

  // voting ties earn half credit: nodes 0 and 1 each see a 1-1 split, node 2
  // sees majority 1 against its own 0
  NeighborGraph tie;
  tie.k = 2;
  tie.neighbors = {{1, 2}, {0, 2}, {0, 1}};
  tie.distances = {{1, 1}, {1, 1}, {1, 1}};
  CHECK(knn_label_score(tie, std::vector<int>{1, 1, 0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("random labels score near one half") {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix x(2000, 2);
  for (auto& v : x.data) v = unif(rng);
  const NeighborGraph g =
      build_graph(x, 3, std::numeric_limits<double>::infinity(), DistanceMetric::Euclidean);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<int> labels(2000);
  for (auto& l : labels) l = coin(rng);
  // 3 sigma of a Bernoulli(1/2) mean over 2000 draws is ~0.034
  CHECK(knn_label_score(g, labels) == doctest::Approx(0.5).epsilon(0.1));
}
