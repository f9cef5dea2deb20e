#include "llp/pseudo_labels.hpp"

#include <cmath>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/metrics.hpp"

namespace llp {

ThresholdMode parse_threshold_mode(const std::string& name) {
  if (name == "hard") return ThresholdMode::Hard;
  if (name == "soft") return ThresholdMode::Soft;
  if (name == "soft_weighted") return ThresholdMode::SoftWeighted;
  throw std::invalid_argument("unknown threshold mode '" + name + "'");
}

std::string threshold_mode_name(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::Hard: return "hard";
    case ThresholdMode::Soft: return "soft";
    case ThresholdMode::SoftWeighted: return "soft_weighted";
  }
  return "hard";
}

PseudoLabelSet threshold(const MarginalVector& marginals, double tau, ThresholdMode mode) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("threshold: tau must be in (0,1)");
  PseudoLabelSet pl;
  pl.tau = tau;
  pl.mode = mode;
  pl.soft = marginals.probs;
  pl.hard.resize(pl.soft.size());
  for (std::size_t i = 0; i < pl.soft.size(); ++i) pl.hard[i] = pl.soft[i] > tau ? 1 : 0;
  if (mode == ThresholdMode::SoftWeighted) {
    pl.weights.resize(pl.soft.size());
    for (std::size_t i = 0; i < pl.soft.size(); ++i) pl.weights[i] = std::abs(pl.soft[i] - tau);
  }
  return pl;
}

double pseudo_label_auroc(const MarginalVector& marginals, std::span<const int> true_labels) {
  return auroc(marginals.probs, true_labels);
}

void save_pseudo_labels_csv(const PseudoLabelSet& pl, const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < pl.soft.size(); ++i)
    rows.push_back({static_cast<double>(i), static_cast<double>(pl.hard[i]), pl.soft[i],
                    pl.weights.empty() ? 1.0 : pl.weights[i]});
  csv::write_numeric(path, {"instance_index", "hard", "soft", "weight"}, rows);
}

}  // namespace llp
