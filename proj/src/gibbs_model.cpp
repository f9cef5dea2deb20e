#include "llp/gibbs_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "llp/csv.hpp"

namespace llp {

namespace {

void check_disjoint(const BagStructure& bags, std::size_t m) {
  std::vector<char> seen(m, 0);
  for (const auto& bag : bags.bags) {
    for (std::size_t idx : bag) {
      if (idx >= m) throw std::invalid_argument("build_ising: bag index outside feature rows");
      if (seen[idx]) throw std::invalid_argument("build_ising: bags overlap at instance " +
                                                 std::to_string(idx));
      seen[idx] = 1;
    }
  }
}

}  // namespace

IsingModel build_ising(const Matrix& features, const BagStructure& bags,
                       std::span<const double> counts, const NeighborGraph& graph,
                       const KernelSpec& kernel, double lambda_b, double lambda_s) {
  if (!(lambda_b >= 0.0) || !(lambda_s >= 0.0))
    throw std::invalid_argument("build_ising: lambda weights must be >= 0");
  if (graph.num_nodes() != features.rows)
    throw std::invalid_argument("build_ising: graph and features disagree on instance count");
  if (counts.size() != bags.num_bags())
    throw std::invalid_argument("build_ising: counts length does not match bag count");
  const std::size_t m = features.rows;
  check_disjoint(bags, m);

  IsingModel model;
  model.num_vars = m;
  model.lambda_b = lambda_b;
  model.lambda_s = lambda_s;
  model.node_potentials.assign(m, 0.0);

  // (u, v, coupling) triples, later sorted and merged per unordered pair.
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> triples;
  triples.reserve(graph.num_directed_edges() +
                  bags.num_bags() * bags.bag_size * (bags.bag_size ? bags.bag_size - 1 : 0) / 2);

  for (std::size_t b = 0; b < bags.num_bags(); ++b) {
    const double field = lambda_b * (2.0 * counts[b] - 1.0);
    const auto& bag = bags.bags[b];
    for (std::size_t a = 0; a < bag.size(); ++a) {
      model.node_potentials[bag[a]] += field;
      for (std::size_t c = a + 1; c < bag.size(); ++c) {
        const auto u = static_cast<std::uint32_t>(std::min(bag[a], bag[c]));
        const auto v = static_cast<std::uint32_t>(std::max(bag[a], bag[c]));
        triples.emplace_back(u, v, -2.0 * lambda_b);
      }
    }
  }

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < graph.neighbors[i].size(); ++t) {
      const std::uint32_t j = graph.neighbors[i][t];
      const double w = kernel_eval(kernel, graph.distances[i][t]);
      // Directed edge i -> j of the quadratic penalty k*(y_i - y_j)^2.
      model.node_potentials[i] -= lambda_s * w;
      model.node_potentials[j] -= lambda_s * w;
      const auto u = static_cast<std::uint32_t>(std::min<std::size_t>(i, j));
      const auto v = static_cast<std::uint32_t>(std::max<std::size_t>(i, j));
      triples.emplace_back(u, v, 2.0 * lambda_s * w);
    }
  }

  std::sort(triples.begin(), triples.end(),
            [](const auto& a, const auto& b) {
              return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                                      : std::get<1>(a) < std::get<1>(b);
            });
  for (std::size_t t = 0; t < triples.size();) {
    const std::uint32_t u = std::get<0>(triples[t]);
    const std::uint32_t v = std::get<1>(triples[t]);
    double coupling = 0.0;
    while (t < triples.size() && std::get<0>(triples[t]) == u && std::get<1>(triples[t]) == v)
      coupling += std::get<2>(triples[t++]);
    model.edge_u.push_back(u);
    model.edge_v.push_back(v);
    model.edge_coupling.push_back(coupling);
  }
  return model;
}

IsingModel build_ising(const Matrix& features, const BagStructure& bags,
                       const NeighborGraph& graph, const KernelSpec& kernel, double lambda_b,
                       double lambda_s) {
  std::vector<double> counts(bags.counts.begin(), bags.counts.end());
  return build_ising(features, bags, counts, graph, kernel, lambda_b, lambda_s);
}

double energy(const IsingModel& model, std::span<const int> y) {
  if (y.size() != model.num_vars) throw std::invalid_argument("energy: configuration length mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < model.num_vars; ++i)
    if (y[i]) e += model.node_potentials[i];
  for (std::size_t t = 0; t < model.num_edges(); ++t)
    if (y[model.edge_u[t]] && y[model.edge_v[t]]) e += model.edge_coupling[t];
  return e;
}

double quadratic_penalty_energy(const Matrix& features, const BagStructure& bags,
                                std::span<const double> counts, const NeighborGraph& graph,
                                const KernelSpec& kernel, double lambda_b, double lambda_s,
                                std::span<const int> y) {
  if (y.size() != features.rows)
    throw std::invalid_argument("quadratic_penalty_energy: configuration length mismatch");
  double e = 0.0;
  for (std::size_t b = 0; b < bags.num_bags(); ++b) {
    double s = 0.0;
    for (std::size_t idx : bags.bags[b]) s += y[idx];
    const double r = s - counts[b];
    e -= lambda_b * r * r;
  }
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
    for (std::size_t t = 0; t < graph.neighbors[i].size(); ++t) {
      const std::uint32_t j = graph.neighbors[i][t];
      const double w = kernel_eval(kernel, graph.distances[i][t]);
      const double d = static_cast<double>(y[i]) - static_cast<double>(y[j]);
      e -= lambda_s * w * d * d;
    }
  }
  return e;
}

double quadratic_penalty_energy(const Matrix& features, const BagStructure& bags,
                                const NeighborGraph& graph, const KernelSpec& kernel,
                                double lambda_b, double lambda_s, std::span<const int> y) {
  std::vector<double> counts(bags.counts.begin(), bags.counts.end());
  return quadratic_penalty_energy(features, bags, counts, graph, kernel, lambda_b, lambda_s, y);
}

void save_model_csv(const IsingModel& model, const std::string& nodes_path,
                    const std::string& pairs_path) {
  std::vector<std::vector<double>> nodes;
  for (std::size_t i = 0; i < model.num_vars; ++i)
    nodes.push_back({static_cast<double>(i), model.node_potentials[i]});
  csv::write_numeric(nodes_path, {"index", "h"}, nodes);

  std::vector<std::vector<double>> pairs;
  for (std::size_t t = 0; t < model.num_edges(); ++t)
    pairs.push_back({static_cast<double>(model.edge_u[t]), static_cast<double>(model.edge_v[t]),
                     model.edge_coupling[t]});
  csv::write_numeric(pairs_path, {"i", "j", "coupling"}, pairs);
}

IsingModel load_model_csv(const std::string& nodes_path, const std::string& pairs_path) {
  csv::Table nodes = csv::read_numeric(nodes_path);
  csv::Table pairs = csv::read_numeric(pairs_path);
  const std::size_t ni = nodes.col_index("index");
  const std::size_t nh = nodes.col_index("h");

  IsingModel model;
  model.num_vars = nodes.num_rows();
  model.node_potentials.assign(model.num_vars, 0.0);
  for (const auto& row : nodes.rows) {
    const auto i = static_cast<std::size_t>(row[ni]);
    if (i >= model.num_vars) throw std::runtime_error("load_model_csv: node index out of range");
    model.node_potentials[i] = row[nh];
  }
  const std::size_t pi = pairs.col_index("i");
  const std::size_t pj = pairs.col_index("j");
  const std::size_t pc = pairs.col_index("coupling");
  for (const auto& row : pairs.rows) {
    auto u = static_cast<std::uint32_t>(row[pi]);
    auto v = static_cast<std::uint32_t>(row[pj]);
    if (u == v) throw std::runtime_error("load_model_csv: self pair");
    if (u > v) std::swap(u, v);
    if (v >= model.num_vars) throw std::runtime_error("load_model_csv: pair index out of range");
    model.edge_u.push_back(u);
    model.edge_v.push_back(v);
    model.edge_coupling.push_back(row[pc]);
  }
  return model;
}

}  // namespace llp
