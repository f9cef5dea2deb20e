#pragma once

#include <span>
#include <string>
#include <vector>

#include "llp/bp_engine.hpp"

namespace llp {

enum class ThresholdMode { Hard, Soft, SoftWeighted };

ThresholdMode parse_threshold_mode(const std::string& name);
std::string threshold_mode_name(ThresholdMode m);

// Supervision targets derived from BP marginals. hard[i] = 1 iff soft[i] >
// tau (strict). weights = |soft - tau|, populated only in SoftWeighted mode.
struct PseudoLabelSet {
  std::vector<int> hard;
  std::vector<double> soft;
  std::vector<double> weights;
  double tau = 0.5;
  ThresholdMode mode = ThresholdMode::Hard;
};

PseudoLabelSet threshold(const MarginalVector& marginals, double tau,
                         ThresholdMode mode = ThresholdMode::Hard);

// AUROC of the marginals against true labels (both classes required).
double pseudo_label_auroc(const MarginalVector& marginals, std::span<const int> true_labels);

void save_pseudo_labels_csv(const PseudoLabelSet& pl, const std::string& path);

}  // namespace llp
