#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llp/dataset.hpp"

namespace llp {

enum class Pooling { Mean, Sum, Max };

Pooling parse_pooling(const std::string& name);
std::string pooling_name(Pooling p);

struct MlpConfig {
  std::vector<std::size_t> hidden_dims{64, 32};  // paper-scale: {5040,1280,320,128,64}
  std::size_t pool_hidden = 0;      // 0: width of the last hidden layer
  std::size_t embedding_layer = 0;  // 0: default L-2; otherwise activation index in [1, L-1]
  Pooling pooling = Pooling::Mean;
};

// Dense binary classifier with an instance head (sigmoid scalar) and a bag
// head that pools the embedding-tap activations over a bag and applies one
// more hidden layer. Activation index l refers to f_l: f_0 is the input,
// f_l (l in [1, L-1]) the post-ReLU output of hidden layer l.
struct MlpModel {
  std::vector<std::size_t> dims;                // [d, h_1, ..., h_{L-1}, 1]
  std::vector<Matrix> weights;                  // weights[l]: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;      // biases[l]: dims[l+1]
  Matrix bag_w1;                                // pool_hidden x tap_dim
  std::vector<double> bag_b1;                   // pool_hidden
  std::vector<double> bag_w2;                   // pool_hidden (row of the 1 x pool_hidden map)
  double bag_b2 = 0.0;
  std::size_t tap = 0;                          // embedding layer L'
  Pooling pooling = Pooling::Mean;

  std::size_t num_layers() const { return weights.size(); }  // L
  std::size_t input_dim() const { return dims.front(); }
  std::size_t tap_dim() const { return dims[tap]; }

  static MlpModel init(std::size_t input_dim, const MlpConfig& cfg, std::uint64_t seed);
};

// Batch activations; acts[0] aliases nothing (copies X), acts[l] is f_l.
struct ForwardCache {
  std::vector<Matrix> acts;
  std::vector<double> logits;  // pre-sigmoid outputs
  std::vector<double> scores;  // sigmoid outputs
};

void forward_batch(const MlpModel& model, const Matrix& x, ForwardCache& cache);

struct InstanceOutput {
  double score = 0.0;
  std::vector<double> embedding;
};
InstanceOutput forward_instance(const MlpModel& model, std::span<const double> x);

// Instance scores for every row.
std::vector<double> score_rows(const MlpModel& model, const Matrix& x);
// Embedding-tap activations for every row (rows x tap_dim).
Matrix embed_rows(const MlpModel& model, const Matrix& x);

// Bag-head score g for one bag of inputs.
double forward_bag(const MlpModel& model, const Matrix& bag_inputs);

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix bag_w1;
  std::vector<double> bag_b1;
  std::vector<double> bag_w2;
  double bag_b2 = 0.0;

  static MlpGradients zeros_like(const MlpModel& model);
  void zero();
};

// Parameter/gradient traversal in a fixed order (for the optimizer and
// finite-difference checks).
std::vector<double*> param_ptrs(MlpModel& model);
std::vector<double*> grad_ptrs(MlpGradients& grads);

// Composite loss over a batch of bags laid out as consecutive row ranges of
// x: bag b occupies rows [bag_offsets[b], bag_offsets[b+1]).
//   sum_i w_i * CE(f(x_i), target_i)  +  lambda_a * sum_b CE(g(S_b), bag_target_b)
// instance_weights may be empty (all ones). Scores are clamped to
// [1e-12, 1-1e-12] inside the CE. Gradients accumulate into *grads.
double aggregate_loss_batch(const MlpModel& model, const Matrix& x,
                            std::span<const std::size_t> bag_offsets,
                            std::span<const double> instance_targets,
                            std::span<const double> instance_weights,
                            std::span<const double> bag_targets, double lambda_a,
                            MlpGradients* grads = nullptr);

// DLLP baseline: CE(mean_i f(x_i), bag_target) per bag; no instance term, no
// bag head.
double dllp_loss_batch(const MlpModel& model, const Matrix& x,
                       std::span<const std::size_t> bag_offsets,
                       std::span<const double> bag_targets, MlpGradients* grads = nullptr);

// Single-bag conveniences.
double aggregate_loss(const MlpModel& model, const Matrix& bag_inputs,
                      std::span<const double> instance_targets, double bag_count,
                      double lambda_a, MlpGradients* grads = nullptr);
double dllp_loss(const MlpModel& model, const Matrix& bag_inputs, double bag_count,
                 MlpGradients* grads = nullptr);

// JSON checkpoint round trip.
void save_mlp_json(const MlpModel& model, const std::string& path);
MlpModel load_mlp_json(const std::string& path);

}  // namespace llp
