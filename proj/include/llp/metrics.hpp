#pragma once

#include <span>

#include "llp/knn_graph.hpp"

namespace llp {

// Area under the ROC curve as the normalized Mann-Whitney U statistic:
// (#concordant + 0.5 * #ties) / (n1 * n0). Throws if only one class is
// present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Fraction of instances whose neighbor majority vote matches their own
// label; voting ties earn 0.5 credit, instances without neighbors are
// excluded from the denominator.
double knn_label_score(const NeighborGraph& graph, std::span<const int> labels);

}  // namespace llp
