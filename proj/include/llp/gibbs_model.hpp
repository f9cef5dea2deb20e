#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llp/bagging.hpp"
#include "llp/dataset.hpp"
#include "llp/knn_graph.hpp"

namespace llp {

// Pairwise binary model over y in {0,1}^m:
//   P(y) ∝ exp( sum_i h_i y_i + sum_{i<j} J_ij y_i y_j )
// Each unordered pair is stored exactly once (u < v).
struct IsingModel {
  std::size_t num_vars = 0;
  std::vector<double> node_potentials;
  std::vector<std::uint32_t> edge_u;
  std::vector<std::uint32_t> edge_v;
  std::vector<double> edge_coupling;
  double lambda_b = 0.0;
  double lambda_s = 0.0;

  std::size_t num_edges() const { return edge_coupling.size(); }
};

// Assembles the Ising model from bag-count constraints and the thresholded
// kNN graph. Bags must be disjoint and, like the graph, indexed over the
// rows of `features`. `counts` below is taken from bags.counts; the overload
// with explicit counts supports noisy/real-valued bag labels.
//
// Per bag S with count c: every member's h gains lambda_b*(2c-1) and every
// in-bag pair's J gains -2*lambda_b. Per directed neighbor edge (i -> j)
// with kernel value w: J_{ij} gains 2*lambda_s*w and both h_i and h_j gain
// -lambda_s*w, so that the energy stays equal to the quadratic-penalty form
// up to a constant.
IsingModel build_ising(const Matrix& features, const BagStructure& bags,
                       const NeighborGraph& graph, const KernelSpec& kernel, double lambda_b,
                       double lambda_s);
IsingModel build_ising(const Matrix& features, const BagStructure& bags,
                       std::span<const double> counts, const NeighborGraph& graph,
                       const KernelSpec& kernel, double lambda_b, double lambda_s);

// Log unnormalized probability of a configuration: sum h_i y_i + sum J_ij y_i y_j.
double energy(const IsingModel& model, std::span<const int> y);

// Original quadratic-penalty energy
//   -lambda_b * sum_S (sum_{j in S} y_j - y(S))^2
//   -lambda_s * sum_{(i,j): j in N_k(i)} k(x_i,x_j) (y_i - y_j)^2
// used to verify that the assembled model differs from it only by a
// configuration-independent constant.
double quadratic_penalty_energy(const Matrix& features, const BagStructure& bags,
                                std::span<const double> counts, const NeighborGraph& graph,
                                const KernelSpec& kernel, double lambda_b, double lambda_s,
                                std::span<const int> y);
double quadratic_penalty_energy(const Matrix& features, const BagStructure& bags,
                                const NeighborGraph& graph, const KernelSpec& kernel,
                                double lambda_b, double lambda_s, std::span<const int> y);

// Inspection dumps: nodes file (index,h) and pairs file (i,j,coupling).
void save_model_csv(const IsingModel& model, const std::string& nodes_path,
                    const std::string& pairs_path);
IsingModel load_model_csv(const std::string& nodes_path, const std::string& pairs_path);

}  // namespace llp
