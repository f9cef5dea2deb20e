#include "llp/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/rng.hpp"

namespace llp {

DistanceMetric parse_metric(const std::string& name) {
  if (name == "cosine") return DistanceMetric::Cosine;
  if (name == "euclidean") return DistanceMetric::Euclidean;
  throw std::invalid_argument("unknown distance metric '" + name + "'");
}

std::string metric_name(DistanceMetric m) {
  return m == DistanceMetric::Cosine ? "cosine" : "euclidean";
}

KernelSpec::Kind parse_kernel_kind(const std::string& name) {
  if (name == "rbf") return KernelSpec::Kind::Rbf;
  if (name == "matern") return KernelSpec::Kind::Matern;
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

std::string kernel_name(KernelSpec::Kind k) {
  return k == KernelSpec::Kind::Rbf ? "rbf" : "matern";
}

double distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
  if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
  if (metric == DistanceMetric::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("distance: cosine distance undefined on a zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double kernel_eval(const KernelSpec& spec, double dist) {
  if (!(dist >= 0.0)) throw std::invalid_argument("kernel_eval: negative distance");
  if (spec.kind == KernelSpec::Kind::Rbf) {
    if (!(spec.gamma > 0.0)) throw std::invalid_argument("kernel_eval: gamma must be > 0");
    return std::exp(-spec.gamma * dist * dist);
  }
  if (!(spec.length_scale > 0.0))
    throw std::invalid_argument("kernel_eval: length scale must be > 0");
  const double r = dist / spec.length_scale;
  if (spec.nu == 0.5) return std::exp(-r);
  if (spec.nu == 1.5) {
    const double t = std::sqrt(3.0) * r;
    return (1.0 + t) * std::exp(-t);
  }
  if (spec.nu == 2.5) {
    const double t = std::sqrt(5.0) * r;
    return (1.0 + t + t * t / 3.0) * std::exp(-t);
  }
  throw std::invalid_argument("kernel_eval: matern nu must be one of 0.5, 1.5, 2.5");
}

std::size_t NeighborGraph::num_directed_edges() const {
  std::size_t n = 0;
  for (const auto& l : neighbors) n += l.size();
  return n;
}

namespace {

// k smallest (distance, index) pairs among j != i with distance <= delta_d.
void query_neighbors(const Matrix& features, std::size_t i, std::size_t k, double delta_d,
                     DistanceMetric metric, std::vector<std::pair<double, std::uint32_t>>& scratch,
                     std::vector<std::uint32_t>& out_idx, std::vector<double>& out_dist) {
  const std::size_t m = features.rows;
  scratch.clear();
  const auto qi = features.row(i);
  for (std::size_t j = 0; j < m; ++j) {
    if (j == i) continue;
    const double d = distance(qi, features.row(j), metric);
    if (d <= delta_d) scratch.emplace_back(d, static_cast<std::uint32_t>(j));
  }
  const std::size_t take = std::min(k, scratch.size());
  std::partial_sort(scratch.begin(), scratch.begin() + take, scratch.end());
  out_idx.resize(take);
  out_dist.resize(take);
  for (std::size_t t = 0; t < take; ++t) {
    out_dist[t] = scratch[t].first;
    out_idx[t] = scratch[t].second;
  }
}

}  // namespace

NeighborGraph build_graph_serial(const Matrix& features, std::size_t k, double delta_d,
                                 DistanceMetric metric) {
  if (k < 1) throw std::invalid_argument("build_graph: k must be >= 1");
  if (!(delta_d > 0.0)) throw std::invalid_argument("build_graph: delta_d must be > 0");

  const std::size_t m = features.rows;
  NeighborGraph g;
  g.k = k;
  g.delta_d = delta_d;
  g.neighbors.resize(m);
  g.distances.resize(m);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  for (std::size_t i = 0; i < m; ++i)
    query_neighbors(features, i, k, delta_d, metric, scratch, g.neighbors[i], g.distances[i]);
  return g;
}

NeighborGraph build_graph(const Matrix& features, std::size_t k, double delta_d,
                          DistanceMetric metric) {
  if (k < 1) throw std::invalid_argument("build_graph: k must be >= 1");
  if (!(delta_d > 0.0)) throw std::invalid_argument("build_graph: delta_d must be > 0");

  const std::size_t m = features.rows;
  NeighborGraph g;
  g.k = k;
  g.delta_d = delta_d;
  g.neighbors.resize(m);
  g.distances.resize(m);

#pragma omp parallel
  {
    std::vector<std::pair<double, std::uint32_t>> scratch;
#pragma omp for schedule(dynamic, 64)
    for (long long i = 0; i < static_cast<long long>(m); ++i)
      query_neighbors(features, static_cast<std::size_t>(i), k, delta_d, metric, scratch,
                      g.neighbors[i], g.distances[i]);
  }
  return g;
}

NeighborGraph subsample_constraints(const NeighborGraph& g, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("subsample_constraints: fraction must be in [0,1]");
  if (fraction == 1.0) return g;

  NeighborGraph out;
  out.k = g.k;
  out.delta_d = g.delta_d;
  out.neighbors.resize(g.num_nodes());
  out.distances.resize(g.num_nodes());
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    for (std::size_t t = 0; t < g.neighbors[i].size(); ++t) {
      if (unif(rng) < fraction) {
        out.neighbors[i].push_back(g.neighbors[i][t]);
        out.distances[i].push_back(g.distances[i][t]);
      }
    }
  }
  return out;
}

void save_graph_csv(const NeighborGraph& g, const KernelSpec& kernel, const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (std::size_t t = 0; t < g.neighbors[i].size(); ++t)
      rows.push_back({static_cast<double>(i), static_cast<double>(g.neighbors[i][t]),
                      g.distances[i][t], kernel_eval(kernel, g.distances[i][t])});
  csv::write_numeric(path, {"src_index", "dst_index", "distance", "kernel_value"}, rows);
}

}  // namespace llp
