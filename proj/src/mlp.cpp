#include "llp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "llp/kernels.hpp"
#include "llp/rng.hpp"

namespace llp {

namespace {

constexpr double kScoreEps = 1e-12;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_score(double p) { return std::clamp(p, kScoreEps, 1.0 - kScoreEps); }

inline double cross_entropy(double q, double p) {
  q = clamp_score(q);
  return -p * std::log(q) - (1.0 - p) * std::log(1.0 - q);
}

void add_bias_relu(Matrix& z, const std::vector<double>& bias) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(z.rows); ++i) {
    double* row = z.data.data() + i * z.cols;
    for (std::size_t j = 0; j < z.cols; ++j) row[j] = std::max(row[j] + bias[j], 0.0);
  }
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t t = 0; t < dst.data.size(); ++t) dst.data[t] += src.data[t];
}

}  // namespace

Pooling parse_pooling(const std::string& name) {
  if (name == "mean") return Pooling::Mean;
  if (name == "sum") return Pooling::Sum;
  if (name == "max") return Pooling::Max;
  throw std::invalid_argument("unknown pooling '" + name + "'");
}

std::string pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Sum: return "sum";
    case Pooling::Max: return "max";
  }
  return "mean";
}

MlpModel MlpModel::init(std::size_t input_dim, const MlpConfig& cfg, std::uint64_t seed) {
  if (input_dim == 0) throw std::invalid_argument("mlp: input dimension must be >= 1");
  MlpModel model;
  model.dims.push_back(input_dim);
  for (std::size_t h : cfg.hidden_dims) {
    if (h == 0) throw std::invalid_argument("mlp: hidden width must be >= 1");
    model.dims.push_back(h);
  }
  model.dims.push_back(1);

  const std::size_t L = model.dims.size() - 1;
  if (cfg.embedding_layer > L - 1)
    throw std::invalid_argument("mlp: embedding layer index out of range");
  model.tap = cfg.embedding_layer != 0 ? cfg.embedding_layer
                                       : (L >= 3 ? L - 2 : (L == 2 ? 1 : 0));
  model.pooling = cfg.pooling;

  auto rng = make_rng(seed);
  auto he_uniform = [&rng](Matrix& w, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (double& v : w.data) v = unif(rng);
  };

  for (std::size_t l = 0; l < L; ++l) {
    Matrix w(model.dims[l + 1], model.dims[l]);
    he_uniform(w, model.dims[l]);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(model.dims[l + 1], 0.0);
  }

  const std::size_t tap_dim = model.dims[model.tap];
  const std::size_t pool_hidden = cfg.pool_hidden ? cfg.pool_hidden : model.dims[L - 1];
  model.bag_w1 = Matrix(pool_hidden, tap_dim);
  he_uniform(model.bag_w1, tap_dim);
  model.bag_b1.assign(pool_hidden, 0.0);
  model.bag_w2.assign(pool_hidden, 0.0);
  {
    const double limit = std::sqrt(6.0 / static_cast<double>(pool_hidden));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (double& v : model.bag_w2) v = unif(rng);
  }
  model.bag_b2 = 0.0;
  return model;
}

void forward_batch(const MlpModel& model, const Matrix& x, ForwardCache& cache) {
  if (x.cols != model.input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
  const std::size_t L = model.num_layers();
  cache.acts.resize(L);
  cache.acts[0] = x;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    matmul_abt(cache.acts[l], model.weights[l], cache.acts[l + 1]);
    add_bias_relu(cache.acts[l + 1], model.biases[l]);
  }
  Matrix out;
  matmul_abt(cache.acts[L - 1], model.weights[L - 1], out);
  cache.logits.resize(x.rows);
  cache.scores.resize(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    cache.logits[i] = out.at(i, 0) + model.biases[L - 1][0];
    cache.scores[i] = sigmoid(cache.logits[i]);
  }
}

InstanceOutput forward_instance(const MlpModel& model, std::span<const double> x) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.data.begin());
  ForwardCache cache;
  forward_batch(model, row, cache);
  InstanceOutput out;
  out.score = cache.scores[0];
  auto emb = cache.acts[model.tap].row(0);
  out.embedding.assign(emb.begin(), emb.end());
  return out;
}

std::vector<double> score_rows(const MlpModel& model, const Matrix& x) {
  ForwardCache cache;
  forward_batch(model, x, cache);
  return cache.scores;
}

Matrix embed_rows(const MlpModel& model, const Matrix& x) {
  ForwardCache cache;
  forward_batch(model, x, cache);
  return cache.acts[model.tap];
}

namespace {

struct BagHeadResult {
  double g = 0.0;
  double g_pre = 0.0;
  std::vector<double> pooled;
  std::vector<double> u_pre;
  std::vector<double> u;
  std::vector<std::size_t> argmax_row;  // max pooling: winning row per coordinate
};

BagHeadResult bag_head_forward(const MlpModel& model, const Matrix& tap_acts, std::size_t begin,
                               std::size_t end) {
  if (end <= begin) throw std::invalid_argument("mlp: empty bag");
  const std::size_t dim = tap_acts.cols;
  const std::size_t count = end - begin;
  BagHeadResult r;
  r.pooled.assign(dim, 0.0);
  if (model.pooling == Pooling::Max) {
    r.argmax_row.assign(dim, begin);
    for (std::size_t j = 0; j < dim; ++j) r.pooled[j] = tap_acts.at(begin, j);
    for (std::size_t i = begin + 1; i < end; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        if (tap_acts.at(i, j) > r.pooled[j]) {
          r.pooled[j] = tap_acts.at(i, j);
          r.argmax_row[j] = i;
        }
  } else {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < dim; ++j) r.pooled[j] += tap_acts.at(i, j);
    if (model.pooling == Pooling::Mean)
      for (double& v : r.pooled) v /= static_cast<double>(count);
  }

  const std::size_t hidden = model.bag_b1.size();
  r.u_pre.resize(hidden);
  r.u.resize(hidden);
  for (std::size_t h = 0; h < hidden; ++h) {
    double s = model.bag_b1[h];
    for (std::size_t j = 0; j < dim; ++j) s += model.bag_w1.at(h, j) * r.pooled[j];
    r.u_pre[h] = s;
    r.u[h] = std::max(s, 0.0);
  }
  r.g_pre = model.bag_b2;
  for (std::size_t h = 0; h < hidden; ++h) r.g_pre += model.bag_w2[h] * r.u[h];
  r.g = sigmoid(r.g_pre);
  return r;
}

// Distributes the pooled-vector gradient back over bag member rows.
void bag_head_backward(const MlpModel& model, const BagHeadResult& r, double dg_pre,
                       std::size_t begin, std::size_t end, Matrix& dtap, MlpGradients& grads) {
  const std::size_t dim = dtap.cols;
  const std::size_t hidden = model.bag_b1.size();
  grads.bag_b2 += dg_pre;
  std::vector<double> du_pre(hidden);
  for (std::size_t h = 0; h < hidden; ++h) {
    grads.bag_w2[h] += dg_pre * r.u[h];
    du_pre[h] = dg_pre * model.bag_w2[h] * (r.u_pre[h] > 0.0 ? 1.0 : 0.0);
  }
  std::vector<double> dpool(dim, 0.0);
  for (std::size_t h = 0; h < hidden; ++h) {
    grads.bag_b1[h] += du_pre[h];
    for (std::size_t j = 0; j < dim; ++j) {
      grads.bag_w1.at(h, j) += du_pre[h] * r.pooled[j];
      dpool[j] += model.bag_w1.at(h, j) * du_pre[h];
    }
  }
  const double scale = model.pooling == Pooling::Mean
                           ? 1.0 / static_cast<double>(end - begin)
                           : 1.0;
  if (model.pooling == Pooling::Max) {
    for (std::size_t j = 0; j < dim; ++j) dtap.at(r.argmax_row[j], j) += dpool[j];
  } else {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < dim; ++j) dtap.at(i, j) += scale * dpool[j];
  }
}

// Backpropagates output deltas (dLoss/dlogit) plus an optional gradient on
// the tap activations through the trunk, accumulating parameter gradients.
void trunk_backward(const MlpModel& model, const ForwardCache& cache,
                    std::vector<double> output_delta, const Matrix* dtap_extra,
                    MlpGradients& grads) {
  const std::size_t L = model.num_layers();
  const std::size_t batch = cache.scores.size();

  Matrix delta(batch, 1);
  for (std::size_t i = 0; i < batch; ++i) delta.at(i, 0) = output_delta[i];

  Matrix scratch;
  for (std::size_t l = L; l-- > 0;) {
    // delta holds dLoss/dz at layer l (batch x dims[l+1]).
    matmul_atb(delta, cache.acts[l], scratch);
    add_into(grads.weights[l], scratch);
    for (std::size_t j = 0; j < delta.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < batch; ++i) s += delta.at(i, j);
      grads.biases[l][j] += s;
    }
    if (l == 0) break;
    Matrix dacts;
    matmul_ab(delta, model.weights[l], dacts);
    if (dtap_extra && l == model.tap) add_into(dacts, *dtap_extra);
    const Matrix& act = cache.acts[l];
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(batch); ++i)
      for (std::size_t j = 0; j < dacts.cols; ++j)
        if (act.at(i, j) <= 0.0) dacts.at(static_cast<std::size_t>(i), j) = 0.0;
    delta = std::move(dacts);
  }
}

}  // namespace

MlpGradients MlpGradients::zeros_like(const MlpModel& model) {
  MlpGradients g;
  for (const auto& w : model.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
  g.bag_w1 = Matrix(model.bag_w1.rows, model.bag_w1.cols);
  g.bag_b1.assign(model.bag_b1.size(), 0.0);
  g.bag_w2.assign(model.bag_w2.size(), 0.0);
  g.bag_b2 = 0.0;
  return g;
}

void MlpGradients::zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  std::fill(bag_w1.data.begin(), bag_w1.data.end(), 0.0);
  std::fill(bag_b1.begin(), bag_b1.end(), 0.0);
  std::fill(bag_w2.begin(), bag_w2.end(), 0.0);
  bag_b2 = 0.0;
}

std::vector<double*> param_ptrs(MlpModel& model) {
  std::vector<double*> ptrs;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (double& v : model.weights[l].data) ptrs.push_back(&v);
    for (double& v : model.biases[l]) ptrs.push_back(&v);
  }
  for (double& v : model.bag_w1.data) ptrs.push_back(&v);
  for (double& v : model.bag_b1) ptrs.push_back(&v);
  for (double& v : model.bag_w2) ptrs.push_back(&v);
  ptrs.push_back(&model.bag_b2);
  return ptrs;
}

std::vector<double*> grad_ptrs(MlpGradients& grads) {
  std::vector<double*> ptrs;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    for (double& v : grads.weights[l].data) ptrs.push_back(&v);
    for (double& v : grads.biases[l]) ptrs.push_back(&v);
  }
  for (double& v : grads.bag_w1.data) ptrs.push_back(&v);
  for (double& v : grads.bag_b1) ptrs.push_back(&v);
  for (double& v : grads.bag_w2) ptrs.push_back(&v);
  ptrs.push_back(&grads.bag_b2);
  return ptrs;
}

double forward_bag(const MlpModel& model, const Matrix& bag_inputs) {
  if (bag_inputs.rows == 0) throw std::invalid_argument("forward_bag: empty bag");
  ForwardCache cache;
  forward_batch(model, bag_inputs, cache);
  return bag_head_forward(model, cache.acts[model.tap], 0, bag_inputs.rows).g;
}

double aggregate_loss_batch(const MlpModel& model, const Matrix& x,
                            std::span<const std::size_t> bag_offsets,
                            std::span<const double> instance_targets,
                            std::span<const double> instance_weights,
                            std::span<const double> bag_targets, double lambda_a,
                            MlpGradients* grads) {
  if (bag_offsets.size() < 2 || bag_offsets.front() != 0 || bag_offsets.back() != x.rows)
    throw std::invalid_argument("aggregate_loss: bad bag offsets");
  if (instance_targets.size() != x.rows)
    throw std::invalid_argument("aggregate_loss: instance target length mismatch");
  if (!instance_weights.empty() && instance_weights.size() != x.rows)
    throw std::invalid_argument("aggregate_loss: instance weight length mismatch");
  if (bag_targets.size() + 1 != bag_offsets.size())
    throw std::invalid_argument("aggregate_loss: bag target length mismatch");

  ForwardCache cache;
  forward_batch(model, x, cache);

  double loss = 0.0;
  std::vector<double> output_delta(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double w = instance_weights.empty() ? 1.0 : instance_weights[i];
    loss += w * cross_entropy(cache.scores[i], instance_targets[i]);
    output_delta[i] = w * (cache.scores[i] - instance_targets[i]);
  }

  Matrix dtap;
  if (lambda_a != 0.0) {
    const Matrix& tap_acts = cache.acts[model.tap];
    if (grads) dtap = Matrix(tap_acts.rows, tap_acts.cols);
    for (std::size_t b = 0; b + 1 < bag_offsets.size(); ++b) {
      const BagHeadResult r = bag_head_forward(model, tap_acts, bag_offsets[b], bag_offsets[b + 1]);
      loss += lambda_a * cross_entropy(r.g, bag_targets[b]);
      if (grads) {
        const double dg_pre = lambda_a * (r.g - bag_targets[b]);
        bag_head_backward(model, r, dg_pre, bag_offsets[b], bag_offsets[b + 1], dtap, *grads);
      }
    }
  }

  if (grads)
    trunk_backward(model, cache, std::move(output_delta),
                   lambda_a != 0.0 && model.tap > 0 ? &dtap : nullptr, *grads);
  return loss;
}

double dllp_loss_batch(const MlpModel& model, const Matrix& x,
                       std::span<const std::size_t> bag_offsets,
                       std::span<const double> bag_targets, MlpGradients* grads) {
  if (bag_offsets.size() < 2 || bag_offsets.front() != 0 || bag_offsets.back() != x.rows)
    throw std::invalid_argument("dllp_loss: bad bag offsets");
  if (bag_targets.size() + 1 != bag_offsets.size())
    throw std::invalid_argument("dllp_loss: bag target length mismatch");

  ForwardCache cache;
  forward_batch(model, x, cache);

  double loss = 0.0;
  std::vector<double> output_delta(x.rows, 0.0);
  for (std::size_t b = 0; b + 1 < bag_offsets.size(); ++b) {
    const std::size_t begin = bag_offsets[b];
    const std::size_t end = bag_offsets[b + 1];
    if (end <= begin) throw std::invalid_argument("dllp_loss: empty bag");
    const double count = static_cast<double>(end - begin);
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += cache.scores[i];
    mean /= count;
    loss += cross_entropy(mean, bag_targets[b]);
    if (grads) {
      const double q = clamp_score(mean);
      const double dmean = (q - bag_targets[b]) / (q * (1.0 - q));
      for (std::size_t i = begin; i < end; ++i)
        output_delta[i] = dmean / count * cache.scores[i] * (1.0 - cache.scores[i]);
    }
  }
  if (grads) trunk_backward(model, cache, std::move(output_delta), nullptr, *grads);
  return loss;
}

double aggregate_loss(const MlpModel& model, const Matrix& bag_inputs,
                      std::span<const double> instance_targets, double bag_count,
                      double lambda_a, MlpGradients* grads) {
  const std::vector<std::size_t> offsets{0, bag_inputs.rows};
  const std::vector<double> bag_target{bag_count / static_cast<double>(bag_inputs.rows)};
  return aggregate_loss_batch(model, bag_inputs, offsets, instance_targets, {}, bag_target,
                              lambda_a, grads);
}

double dllp_loss(const MlpModel& model, const Matrix& bag_inputs, double bag_count,
                 MlpGradients* grads) {
  const std::vector<std::size_t> offsets{0, bag_inputs.rows};
  const std::vector<double> bag_target{bag_count / static_cast<double>(bag_inputs.rows)};
  return dllp_loss_batch(model, bag_inputs, offsets, bag_target, grads);
}

void save_mlp_json(const MlpModel& model, const std::string& path) {
  nlohmann::json j;
  j["dims"] = model.dims;
  j["tap"] = model.tap;
  j["pooling"] = pooling_name(model.pooling);
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& w : model.weights) j["weights"].push_back(w.data);
  for (const auto& b : model.biases) j["biases"].push_back(b);
  j["bag_w1"] = model.bag_w1.data;
  j["bag_w1_rows"] = model.bag_w1.rows;
  j["bag_b1"] = model.bag_b1;
  j["bag_w2"] = model.bag_w2;
  j["bag_b2"] = model.bag_b2;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << j.dump();
}

MlpModel load_mlp_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  in >> j;
  MlpModel model;
  model.dims = j.at("dims").get<std::vector<std::size_t>>();
  model.tap = j.at("tap").get<std::size_t>();
  model.pooling = parse_pooling(j.at("pooling").get<std::string>());
  const auto& jw = j.at("weights");
  const auto& jb = j.at("biases");
  for (std::size_t l = 0; l + 1 < model.dims.size(); ++l) {
    Matrix w(model.dims[l + 1], model.dims[l]);
    w.data = jw.at(l).get<std::vector<double>>();
    if (w.data.size() != w.rows * w.cols) throw std::runtime_error("checkpoint: bad weight shape");
    model.weights.push_back(std::move(w));
    model.biases.push_back(jb.at(l).get<std::vector<double>>());
  }
  const auto w1_rows = j.at("bag_w1_rows").get<std::size_t>();
  model.bag_w1 = Matrix(w1_rows, model.dims[model.tap]);
  model.bag_w1.data = j.at("bag_w1").get<std::vector<double>>();
  if (model.bag_w1.data.size() != model.bag_w1.rows * model.bag_w1.cols)
    throw std::runtime_error("checkpoint: bad bag head shape");
  model.bag_b1 = j.at("bag_b1").get<std::vector<double>>();
  model.bag_w2 = j.at("bag_w2").get<std::vector<double>>();
  model.bag_b2 = j.at("bag_b2").get<double>();
  return model;
}

}  // namespace llp
