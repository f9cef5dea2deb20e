#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace llp {

// Disjoint bags over instance indices plus the per-bag positive-label count.
// Indices refer to whatever index space the caller used (global dataset rows
// or rows of a compacted train matrix).
struct BagStructure {
  std::vector<std::vector<std::size_t>> bags;
  std::vector<int> counts;  // y(S_i), 0 <= count <= |S_i|
  std::size_t bag_size = 0;

  std::size_t num_bags() const { return bags.size(); }
  std::size_t num_bagged_instances() const;
};

// Draws floor(|train|/B) disjoint bags of exactly B instances each, without
// replacement; leftover instances are dropped. Counts come from labels
// (indexed by instance index). Deterministic in seed.
BagStructure generate_bags(const std::vector<std::size_t>& train_indices, std::size_t bag_size,
                           const std::vector<int>& labels, std::uint64_t seed);

struct NoisyBagLabels {
  std::vector<double> proportions;  // clipped to [0,1]
  double epsilon = 0.0;
  double delta = 0.0;
  double tau_noise = 0.0;  // Gaussian std of the injected noise
};

// Noise scale of the Gaussian mechanism on a bag proportion:
// tau = (1/B) * sqrt(2 ln(1.25/delta)) / epsilon  (sensitivity 1/B).
double gaussian_mechanism_tau(std::size_t bag_size, double epsilon, double delta);

// proportion_i = clip(y(S_i)/B + N(0, tau^2), 0, 1); deterministic in seed.
NoisyBagLabels add_label_dp_noise(const BagStructure& bs, double epsilon, double delta,
                                  std::uint64_t seed);

// Nearest-integer count for feeding noisy proportions back into count-based
// potentials, clamped to [0, B].
int rounded_count(double proportion, std::size_t bag_size);

// CSV round trip: assignments file has columns instance_index,bag_id;
// counts file has bag_id,count.
void save_bags(const BagStructure& bs, const std::string& assignments_path,
               const std::string& counts_path);
BagStructure load_bags(const std::string& assignments_path, const std::string& counts_path);

}  // namespace llp
