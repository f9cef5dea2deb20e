#include "llp/bp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "llp/rng.hpp"

namespace llp {

namespace {

constexpr double kLogHalf = -0.6931471805599453;

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// CSR adjacency over the model's stored pairs. For node slot s:
// other[s] is the neighbor, in_msg[s] the directed message id other->node,
// out_msg[s] the id node->other, and pair[s] the pair index (for coupling).
struct Adjacency {
  std::size_t n = 0;
  std::size_t m = 0;  // pair count
  std::vector<std::size_t> offset;
  std::vector<std::uint32_t> other;
  std::vector<std::uint32_t> in_msg;
  std::vector<std::uint32_t> out_msg;
  std::vector<std::uint32_t> pair;

  std::size_t degree(std::size_t i) const { return offset[i + 1] - offset[i]; }
};

Adjacency build_adjacency(const IsingModel& model) {
  Adjacency adj;
  adj.n = model.num_vars;
  adj.m = model.num_edges();
  adj.offset.assign(adj.n + 1, 0);
  for (std::size_t t = 0; t < adj.m; ++t) {
    ++adj.offset[model.edge_u[t] + 1];
    ++adj.offset[model.edge_v[t] + 1];
  }
  for (std::size_t i = 0; i < adj.n; ++i) adj.offset[i + 1] += adj.offset[i];
  adj.other.resize(2 * adj.m);
  adj.in_msg.resize(2 * adj.m);
  adj.out_msg.resize(2 * adj.m);
  adj.pair.resize(2 * adj.m);
  std::vector<std::size_t> cursor(adj.offset.begin(), adj.offset.end() - 1);
  for (std::size_t t = 0; t < adj.m; ++t) {
    const std::uint32_t u = model.edge_u[t];
    const std::uint32_t v = model.edge_v[t];
    // Directed id 2t carries u->v, 2t+1 carries v->u.
    std::size_t su = cursor[u]++;
    adj.other[su] = v;
    adj.in_msg[su] = static_cast<std::uint32_t>(2 * t + 1);
    adj.out_msg[su] = static_cast<std::uint32_t>(2 * t);
    adj.pair[su] = static_cast<std::uint32_t>(t);
    std::size_t sv = cursor[v]++;
    adj.other[sv] = u;
    adj.in_msg[sv] = static_cast<std::uint32_t>(2 * t);
    adj.out_msg[sv] = static_cast<std::uint32_t>(2 * t + 1);
    adj.pair[sv] = static_cast<std::uint32_t>(t);
  }
  return adj;
}

enum class Semiring { Sum, Max };

inline double combine(Semiring s, double a, double b) {
  return s == Semiring::Sum ? log_sum_exp(a, b) : std::max(a, b);
}

struct RunResult {
  std::vector<double> belief_delta;  // belief(1) - belief(0) per node
  BpDiagnostics diag;
  MessageState messages;
};

// Flooding-schedule message passing. Parallel over nodes; every directed
// message is produced by exactly one thread from the previous round's
// buffers with a fixed accumulation order, so results are bit-identical for
// any thread count.
RunResult run_message_passing(const IsingModel& model, const BpOptions& opt, Semiring semiring) {
  if (opt.max_rounds < 1) throw std::invalid_argument("bp: max_rounds must be >= 1");
  if (!(opt.damping >= 0.0 && opt.damping < 1.0))
    throw std::invalid_argument("bp: damping must be in [0,1)");

  const Adjacency adj = build_adjacency(model);
  const std::size_t n = adj.n;
  const std::size_t ndir = 2 * adj.m;

  MessageState cur{std::vector<double>(ndir, kLogHalf), std::vector<double>(ndir, kLogHalf)};
  MessageState next = cur;
  std::vector<double> sum0(n), sum1(n);

  BpDiagnostics diag;
  for (std::size_t round = 0; round < opt.max_rounds; ++round) {
    double delta = 0.0;
#pragma omp parallel
    {
      // Per-node totals over incoming messages (plus the node's own field).
#pragma omp for schedule(static)
      for (long long jj = 0; jj < static_cast<long long>(n); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        double a = 0.0;
        double b = model.node_potentials[j];
        for (std::size_t s = adj.offset[j]; s < adj.offset[j + 1]; ++s) {
          a += cur.log0[adj.in_msg[s]];
          b += cur.log1[adj.in_msg[s]];
        }
        sum0[j] = a;
        sum1[j] = b;
      }
      // New message j->i excludes i's contribution and folds in the coupling.
#pragma omp for schedule(static) reduction(max : delta)
      for (long long jj = 0; jj < static_cast<long long>(n); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        for (std::size_t s = adj.offset[j]; s < adj.offset[j + 1]; ++s) {
          const std::uint32_t rev = adj.in_msg[s];   // i -> j
          const std::uint32_t fwd = adj.out_msg[s];  // j -> i
          const double coupling = model.edge_coupling[adj.pair[s]];
          const double a = sum0[j] - cur.log0[rev];
          const double b = sum1[j] - cur.log1[rev];
          double l0 = combine(semiring, a, b);
          double l1 = combine(semiring, a, b + coupling);
          if (opt.damping > 0.0) {
            l0 = (1.0 - opt.damping) * l0 + opt.damping * cur.log0[fwd];
            l1 = (1.0 - opt.damping) * l1 + opt.damping * cur.log1[fwd];
          }
          const double norm = log_sum_exp(l0, l1);
          l0 -= norm;
          l1 -= norm;
          delta = std::max(delta, std::abs(std::exp(l1) - std::exp(cur.log1[fwd])));
          next.log0[fwd] = l0;
          next.log1[fwd] = l1;
        }
      }
    }
    std::swap(cur, next);
    diag.message_deltas.push_back(delta);
    diag.rounds_run = round + 1;
    if (opt.tol > 0.0 && delta < opt.tol) {
      diag.converged = true;
      break;
    }
  }

  RunResult out;
  out.belief_delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = model.node_potentials[i];
    for (std::size_t s = adj.offset[i]; s < adj.offset[i + 1]; ++s)
      d += cur.log1[adj.in_msg[s]] - cur.log0[adj.in_msg[s]];
    out.belief_delta[i] = d;
  }
  out.diag = std::move(diag);
  out.messages = std::move(cur);
  return out;
}

// Reference implementation with explicit neighborhood products (no
// subtraction trick); serial by construction.
RunResult run_message_passing_serial(const IsingModel& model, const BpOptions& opt,
                                     Semiring semiring) {
  if (opt.max_rounds < 1) throw std::invalid_argument("bp: max_rounds must be >= 1");

  const Adjacency adj = build_adjacency(model);
  const std::size_t n = adj.n;
  const std::size_t ndir = 2 * adj.m;

  MessageState cur{std::vector<double>(ndir, kLogHalf), std::vector<double>(ndir, kLogHalf)};
  MessageState next = cur;

  BpDiagnostics diag;
  for (std::size_t round = 0; round < opt.max_rounds; ++round) {
    double delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t s = adj.offset[j]; s < adj.offset[j + 1]; ++s) {
        const std::uint32_t i = adj.other[s];
        const std::uint32_t fwd = adj.out_msg[s];
        const double coupling = model.edge_coupling[adj.pair[s]];
        double a = 0.0;
        double b = model.node_potentials[j];
        for (std::size_t s2 = adj.offset[j]; s2 < adj.offset[j + 1]; ++s2) {
          if (adj.other[s2] == i) continue;
          a += cur.log0[adj.in_msg[s2]];
          b += cur.log1[adj.in_msg[s2]];
        }
        double l0 = combine(semiring, a, b);
        double l1 = combine(semiring, a, b + coupling);
        if (opt.damping > 0.0) {
          l0 = (1.0 - opt.damping) * l0 + opt.damping * cur.log0[fwd];
          l1 = (1.0 - opt.damping) * l1 + opt.damping * cur.log1[fwd];
        }
        const double norm = log_sum_exp(l0, l1);
        l0 -= norm;
        l1 -= norm;
        delta = std::max(delta, std::abs(std::exp(l1) - std::exp(cur.log1[fwd])));
        next.log0[fwd] = l0;
        next.log1[fwd] = l1;
      }
    }
    std::swap(cur, next);
    diag.message_deltas.push_back(delta);
    diag.rounds_run = round + 1;
    if (opt.tol > 0.0 && delta < opt.tol) {
      diag.converged = true;
      break;
    }
  }

  RunResult out;
  out.belief_delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = model.node_potentials[i];
    for (std::size_t s = adj.offset[i]; s < adj.offset[i + 1]; ++s)
      d += cur.log1[adj.in_msg[s]] - cur.log0[adj.in_msg[s]];
    out.belief_delta[i] = d;
  }
  out.diag = std::move(diag);
  out.messages = std::move(cur);
  return out;
}

std::vector<int> decode(const std::vector<double>& belief_delta) {
  std::vector<int> y(belief_delta.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = belief_delta[i] > 0.0 ? 1 : 0;
  return y;
}

}  // namespace

MarginalVector sum_product(const IsingModel& model, const BpOptions& opt, BpDiagnostics* diag,
                           MessageState* final_messages) {
  RunResult r = run_message_passing(model, opt, Semiring::Sum);
  if (diag) *diag = r.diag;
  if (final_messages) *final_messages = std::move(r.messages);
  MarginalVector mv;
  mv.probs.resize(r.belief_delta.size());
  for (std::size_t i = 0; i < mv.probs.size(); ++i) mv.probs[i] = sigmoid(r.belief_delta[i]);
  return mv;
}

MarginalVector sum_product_serial(const IsingModel& model, const BpOptions& opt,
                                  BpDiagnostics* diag) {
  RunResult r = run_message_passing_serial(model, opt, Semiring::Sum);
  if (diag) *diag = r.diag;
  MarginalVector mv;
  mv.probs.resize(r.belief_delta.size());
  for (std::size_t i = 0; i < mv.probs.size(); ++i) mv.probs[i] = sigmoid(r.belief_delta[i]);
  return mv;
}

std::vector<int> max_product(const IsingModel& model, const BpOptions& opt) {
  return decode(run_message_passing(model, opt, Semiring::Max).belief_delta);
}

std::vector<int> max_product_serial(const IsingModel& model, const BpOptions& opt) {
  return decode(run_message_passing_serial(model, opt, Semiring::Max).belief_delta);
}

MooijResult mooij_contraction_check(const IsingModel& model) {
  // Neighborhoods over nonzero couplings only.
  std::vector<std::size_t> deg(model.num_vars, 0);
  std::vector<double> max_tanh(model.num_vars, 0.0);
  for (std::size_t t = 0; t < model.num_edges(); ++t) {
    if (model.edge_coupling[t] == 0.0) continue;
    const double v = std::tanh(std::abs(model.edge_coupling[t]));
    const std::uint32_t u = model.edge_u[t];
    const std::uint32_t w = model.edge_v[t];
    ++deg[u];
    ++deg[w];
    max_tanh[u] = std::max(max_tanh[u], v);
    max_tanh[w] = std::max(max_tanh[w], v);
  }
  MooijResult res;
  for (std::size_t i = 0; i < model.num_vars; ++i) {
    if (deg[i] == 0) continue;
    res.value = std::max(res.value, static_cast<double>(deg[i] - 1) * max_tanh[i]);
  }
  res.holds = res.value < 1.0;
  return res;
}

StabilityResult linearized_stability(const IsingModel& model, std::size_t power_iters) {
  // Oriented edges of the 0/1 adjacency of nonzero couplings.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::size_t t = 0; t < model.num_edges(); ++t)
    if (model.edge_coupling[t] != 0.0) pairs.emplace_back(model.edge_u[t], model.edge_v[t]);
  if (pairs.empty()) throw std::invalid_argument("linearized_stability: model has no edges");

  const std::size_t n = model.num_vars;
  const std::size_t ndir = 2 * pairs.size();  // id 2t: u->v, 2t+1: v->u

  // Slot lists per node: incoming and outgoing directed ids.
  std::vector<std::vector<std::uint32_t>> in_ids(n), out_ids(n);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto [u, v] = pairs[t];
    out_ids[u].push_back(static_cast<std::uint32_t>(2 * t));
    in_ids[v].push_back(static_cast<std::uint32_t>(2 * t));
    out_ids[v].push_back(static_cast<std::uint32_t>(2 * t + 1));
    in_ids[u].push_back(static_cast<std::uint32_t>(2 * t + 1));
  }
  // reverse id of 2t is 2t+1 and vice versa
  auto rev = [](std::uint32_t e) { return e ^ 1u; };

  std::vector<double> x(ndir), y(ndir), totals(n);
  auto rng = make_rng(0x5715b17u);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (auto& v : x) v = unif(rng);

  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double t : v) s += t * t;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& t : v) t /= s;
    return s;
  };
  normalize(x);

  // (Hx)_{j->i} = sum_{k in N(j)\i} x_{k->j} = totals_in(j) - x_{i->j}
  auto apply_h = [&](const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::uint32_t e : in_ids[j]) s += src[e];
      totals[j] = s;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::uint32_t e : out_ids[j])  // e is j->i; the excluded column is i->j = rev(e)
        dst[e] = totals[j] - src[rev(e)];
  };
  // (H^T y)_{k->j} = sum_{i in N(j)\k} y_{j->i} = totals_out(j) - y_{j->k}
  auto apply_ht = [&](const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::uint32_t e : out_ids[j]) s += src[e];
      totals[j] = s;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::uint32_t e : in_ids[j])  // e is k->j; the excluded row is j->k = rev(e)
        dst[e] = totals[j] - src[rev(e)];
  };

  StabilityResult res;
  double prev = -1.0;
  for (std::size_t it = 0; it < power_iters; ++it) {
    apply_h(x, y);
    double norm_y_sq = 0.0;
    for (double v : y) norm_y_sq += v * v;
    const double sigma = std::sqrt(norm_y_sq);  // ||Hx|| with ||x|| = 1
    res.spectral_norm = sigma;
    res.iterations = it + 1;
    apply_ht(y, x);
    if (normalize(x) == 0.0) break;  // x landed in the null space
    if (prev >= 0.0 && std::abs(sigma - prev) <= 1e-13 * std::max(1.0, sigma)) break;
    prev = sigma;
  }
  res.beta_threshold = res.spectral_norm > 1.0
                           ? std::atanh(1.0 / res.spectral_norm)
                           : std::numeric_limits<double>::infinity();
  return res;
}

}  // namespace llp
