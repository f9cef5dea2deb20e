#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "llp/dataset.hpp"

namespace llp {

enum class DistanceMetric { Cosine, Euclidean };

DistanceMetric parse_metric(const std::string& name);
std::string metric_name(DistanceMetric m);

// cosine: 1 - a.b/(|a||b|), in [0,2]; euclidean: |a-b|_2. Cosine throws on a
// zero vector.
double distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric);

// Similarity kernel applied to a distance; value in (0,1], 1 at distance 0,
// monotone non-increasing. Matern is restricted to the half-integer closed
// forms nu in {1/2, 3/2, 5/2}.
struct KernelSpec {
  enum class Kind { Rbf, Matern };
  Kind kind = Kind::Matern;
  double gamma = 1.0;         // RBF: exp(-gamma d^2)
  double nu = 1.5;            // Matern smoothness
  double length_scale = 1.0;  // Matern l
};

KernelSpec::Kind parse_kernel_kind(const std::string& name);
std::string kernel_name(KernelSpec::Kind k);
double kernel_eval(const KernelSpec& spec, double dist);

// Directed k-nearest-neighbor lists, thresholded at delta_d. Neighbor lists
// are ordered by (distance, index) ascending; ties always break toward the
// lowest index so N_1 is a singleton.
struct NeighborGraph {
  std::vector<std::vector<std::uint32_t>> neighbors;
  std::vector<std::vector<double>> distances;
  std::size_t k = 0;
  double delta_d = std::numeric_limits<double>::infinity();

  std::size_t num_nodes() const { return neighbors.size(); }
  std::size_t num_directed_edges() const;
};

// Exact brute-force construction, parallel over query points.
NeighborGraph build_graph(const Matrix& features, std::size_t k, double delta_d,
                          DistanceMetric metric);
// Serial reference implementation kept for testing the parallel kernel.
NeighborGraph build_graph_serial(const Matrix& features, std::size_t k, double delta_d,
                                 DistanceMetric metric);

// Keeps each directed neighbor entry independently with probability
// `fraction`; deterministic in seed.
NeighborGraph subsample_constraints(const NeighborGraph& g, double fraction, std::uint64_t seed);

// Debug/ablation export: src_index,dst_index,distance,kernel_value.
void save_graph_csv(const NeighborGraph& g, const KernelSpec& kernel, const std::string& path);

}  // namespace llp
