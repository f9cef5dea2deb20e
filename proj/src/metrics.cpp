#include "llp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace llp {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
  const std::size_t n = scores.size();
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("auroc: NaN score");
  std::size_t n1 = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("auroc: labels must be 0/1");
    n1 += static_cast<std::size_t>(l);
  }
  const std::size_t n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mid-ranks over tied score groups; rank sum of positives gives U.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average rank
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += mid_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

double knn_label_score(const NeighborGraph& graph, std::span<const int> labels) {
  if (graph.num_nodes() != labels.size())
    throw std::invalid_argument("knn_label_score: length mismatch");
  if (graph.num_directed_edges() == 0)
    throw std::invalid_argument("knn_label_score: graph has no edges");

  double credit = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    const auto& nb = graph.neighbors[i];
    if (nb.empty()) continue;
    ++counted;
    std::size_t positives = 0;
    for (std::uint32_t j : nb) positives += static_cast<std::size_t>(labels[j]);
    const std::size_t negatives = nb.size() - positives;
    if (positives == negatives) {
      credit += 0.5;
    } else {
      const int majority = positives > negatives ? 1 : 0;
      if (majority == labels[i]) credit += 1.0;
    }
  }
  return credit / static_cast<double>(counted);
}

}  // namespace llp
