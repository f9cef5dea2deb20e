// Test-only oracles: exhaustive enumeration over binary configurations,
// finite-difference gradients, union-find, and random model generators.
// Everything here is independent of the message-passing and backprop code
// paths it is used to check.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "llp/bp_engine.hpp"
#include "llp/gibbs_model.hpp"
#include "llp/mlp.hpp"

namespace llp::testing {

inline double config_energy(const IsingModel& model, std::uint32_t mask) {
  double e = 0.0;
  for (std::size_t i = 0; i < model.num_vars; ++i)
    if (mask & (1u << i)) e += model.node_potentials[i];
  for (std::size_t t = 0; t < model.num_edges(); ++t)
    if ((mask & (1u << model.edge_u[t])) && (mask & (1u << model.edge_v[t])))
      e += model.edge_coupling[t];
  return e;
}

// Exact marginals P(y_i = 1) by summing exp(energy) over all 2^m configs.
inline std::vector<double> enumerate_marginals(const IsingModel& model) {
  if (model.num_vars > 24) throw std::invalid_argument("enumerate_marginals: too many variables");
  const std::uint32_t n_cfg = 1u << model.num_vars;
  std::vector<double> energies(n_cfg);
  double max_e = -std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < n_cfg; ++mask) {
    energies[mask] = config_energy(model, mask);
    max_e = std::max(max_e, energies[mask]);
  }
  double z = 0.0;
  std::vector<double> z1(model.num_vars, 0.0);
  for (std::uint32_t mask = 0; mask < n_cfg; ++mask) {
    const double w = std::exp(energies[mask] - max_e);
    z += w;
    for (std::size_t i = 0; i < model.num_vars; ++i)
      if (mask & (1u << i)) z1[i] += w;
  }
  std::vector<double> probs(model.num_vars);
  for (std::size_t i = 0; i < model.num_vars; ++i) probs[i] = z1[i] / z;
  return probs;
}

struct MapResult {
  std::vector<int> config;
  bool unique = true;
};

inline MapResult enumerate_map(const IsingModel& model) {
  const std::uint32_t n_cfg = 1u << model.num_vars;
  std::uint32_t best = 0;
  double best_e = config_energy(model, 0);
  bool unique = true;
  for (std::uint32_t mask = 1; mask < n_cfg; ++mask) {
    const double e = config_energy(model, mask);
    if (e > best_e + 1e-12) {
      best_e = e;
      best = mask;
      unique = true;
    } else if (std::abs(e - best_e) <= 1e-12) {
      unique = false;
    }
  }
  MapResult r;
  r.unique = unique;
  r.config.resize(model.num_vars);
  for (std::size_t i = 0; i < model.num_vars; ++i) r.config[i] = (best >> i) & 1u;
  return r;
}

// Random tree-structured model: node i > 0 attaches to a random earlier node.
inline IsingModel random_tree_model(std::size_t m, std::mt19937_64& rng, double h_range,
                                    double j_range) {
  std::uniform_real_distribution<double> h_dist(-h_range, h_range);
  std::uniform_real_distribution<double> j_dist(-j_range, j_range);
  IsingModel model;
  model.num_vars = m;
  model.node_potentials.resize(m);
  for (auto& h : model.node_potentials) h = h_dist(rng);
  for (std::size_t i = 1; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    const std::size_t p = parent(rng);
    model.edge_u.push_back(static_cast<std::uint32_t>(std::min(p, i)));
    model.edge_v.push_back(static_cast<std::uint32_t>(std::max(p, i)));
    model.edge_coupling.push_back(j_dist(rng));
  }
  return model;
}

inline IsingModel random_loopy_model(std::size_t m, double edge_prob, std::mt19937_64& rng,
                                     double h_range, double j_range) {
  std::uniform_real_distribution<double> h_dist(-h_range, h_range);
  std::uniform_real_distribution<double> j_dist(-j_range, j_range);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  IsingModel model;
  model.num_vars = m;
  model.node_potentials.resize(m);
  for (auto& h : model.node_potentials) h = h_dist(rng);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (unif(rng) < edge_prob) {
        model.edge_u.push_back(static_cast<std::uint32_t>(i));
        model.edge_v.push_back(static_cast<std::uint32_t>(j));
        model.edge_coupling.push_back(j_dist(rng));
      }
  return model;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  // Returns false if x and y were already connected (a cycle would form).
  bool unite(std::size_t x, std::size_t y) {
    const std::size_t rx = find(x), ry = find(y);
    if (rx == ry) return false;
    parent[rx] = ry;
    return true;
  }
};

// Finite differences are only trustworthy away from the loss's kinks. This
// recomputes the forward pass with its own loops and rejects configurations
// where any ReLU pre-activation (trunk or bag head) sits within `margin` of
// zero, any max-pool argmax is nearly tied, or a score saturates into the
// clamp region.
inline bool fd_safe(const MlpModel& model, const Matrix& x,
                    const std::vector<std::size_t>& bag_offsets, double margin = 1e-3) {
  const std::size_t L = model.num_layers();
  Matrix act = x;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    Matrix next(act.rows, model.dims[l + 1]);
    for (std::size_t i = 0; i < act.rows; ++i)
      for (std::size_t o = 0; o < next.cols; ++o) {
        double z = model.biases[l][o];
        for (std::size_t t = 0; t < act.cols; ++t) z += model.weights[l].at(o, t) * act.at(i, t);
        if (std::abs(z) < margin) return false;
        next.at(i, o) = std::max(z, 0.0);
      }
    if (l + 1 == model.tap) {
      // the bag head pools this layer per bag; check its ReLU and pool gaps
      for (std::size_t b = 0; b + 1 < bag_offsets.size(); ++b) {
        const std::size_t begin = bag_offsets[b], end = bag_offsets[b + 1];
        std::vector<double> pooled(next.cols, 0.0);
        for (std::size_t o = 0; o < next.cols; ++o) {
          if (model.pooling == Pooling::Max) {
            double best = -1e300, second = -1e300;
            for (std::size_t i = begin; i < end; ++i) {
              const double v = next.at(i, o);
              if (v > best) {
                second = best;
                best = v;
              } else if (v > second) {
                second = v;
              }
            }
            if (end - begin > 1 && best - second < margin) return false;
            pooled[o] = best;
          } else {
            for (std::size_t i = begin; i < end; ++i) pooled[o] += next.at(i, o);
            if (model.pooling == Pooling::Mean) pooled[o] /= static_cast<double>(end - begin);
          }
        }
        for (std::size_t h = 0; h < model.bag_b1.size(); ++h) {
          double z = model.bag_b1[h];
          for (std::size_t o = 0; o < pooled.size(); ++o) z += model.bag_w1.at(h, o) * pooled[o];
          if (std::abs(z) < margin) return false;
        }
      }
    }
    act = std::move(next);
  }
  for (std::size_t i = 0; i < act.rows; ++i) {
    double z = model.biases[L - 1][0];
    for (std::size_t t = 0; t < act.cols; ++t) z += model.weights[L - 1].at(0, t) * act.at(i, t);
    if (std::abs(z) > 25.0) return false;  // sigmoid saturation near the clamp
  }
  return true;
}

// Central finite differences over every model parameter. Returns the maximum
// relative error against the analytic gradient.
inline double max_gradient_rel_error(MlpModel& model,
                                     const std::function<double(MlpModel&, MlpGradients*)>& loss,
                                     double step = 1e-5) {
  MlpGradients grads = MlpGradients::zeros_like(model);
  loss(model, &grads);
  const std::vector<double*> params = param_ptrs(model);
  const std::vector<double*> gptrs = grad_ptrs(grads);

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + step;
    const double up = loss(model, nullptr);
    *params[i] = saved - step;
    const double down = loss(model, nullptr);
    *params[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double analytic = *gptrs[i];
    const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace llp::testing
