#pragma once

#include <cstdint>
#include <vector>

#include "llp/gibbs_model.hpp"

namespace llp {

struct BpOptions {
  std::size_t max_rounds = 100;  // T
  double damping = 0.0;          // in [0,1); 0 reproduces undamped updates
  double tol = 1e-8;             // early-stop threshold on message delta; 0 runs all rounds
};

struct BpDiagnostics {
  std::size_t rounds_run = 0;
  std::vector<double> message_deltas;  // per-round max abs change of normalized messages
  bool converged = false;
};

// Per-instance marginal P(y_i = 1).
struct MarginalVector {
  std::vector<double> probs;
};

// Normalized log-messages for every ordered adjacent pair. Message for pair
// t = (u,v) in direction u->v lives at index 2t, direction v->u at 2t+1.
// Invariant after every round: exp(log0[e]) + exp(log1[e]) == 1.
struct MessageState {
  std::vector<double> log0;
  std::vector<double> log1;
};

// Synchronous (flooding) sum-product in the log domain. Messages start
// uniform; every round recomputes all messages from the previous round and
// renormalizes. Node potentials enter once per node: h_j multiplies node j's
// outgoing messages, and h_i multiplies the belief at i, which makes the
// marginals exact on trees.
MarginalVector sum_product(const IsingModel& model, const BpOptions& opt,
                           BpDiagnostics* diag = nullptr, MessageState* final_messages = nullptr);

// Serial reference: recomputes every neighborhood product by direct
// exclusion instead of the subtract-one-message trick. Kept for testing the
// parallel kernel; O(sum_j deg(j)^2) per round.
MarginalVector sum_product_serial(const IsingModel& model, const BpOptions& opt,
                                  BpDiagnostics* diag = nullptr);

// Max-product variant; returns the per-node argmax configuration with ties
// broken toward 0.
std::vector<int> max_product(const IsingModel& model, const BpOptions& opt);
std::vector<int> max_product_serial(const IsingModel& model, const BpOptions& opt);

// Sufficient condition for sum-product contraction:
//   max_i [ (|N(i)|-1) * max_{j in N(i)} tanh|J_ij| ] < 1.
struct MooijResult {
  double value = 0.0;
  bool holds = true;
};
MooijResult mooij_contraction_check(const IsingModel& model);

// Spectral norm of the 2|E| x 2|E| oriented-edge incidence operator of the
// nonzero-coupling adjacency (row j->i has ones in columns k->j for
// k in N(j)\{i}), estimated by power iteration on H^T H, plus the inverse
// temperature bound atanh(1/||H||_2) below which linearized BP contracts
// (infinity when ||H||_2 <= 1). Throws on an edgeless model.
struct StabilityResult {
  double spectral_norm = 0.0;
  double beta_threshold = 0.0;
  std::size_t iterations = 0;
};
StabilityResult linearized_stability(const IsingModel& model, std::size_t power_iters = 500);

}  // namespace llp
