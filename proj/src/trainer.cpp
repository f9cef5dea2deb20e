#include "llp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/metrics.hpp"
#include "llp/rng.hpp"

namespace llp {

namespace {

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double weight_decay)
      : lr_(lr), wd_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double* const> params, std::span<double* const> grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = *grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      double w = *params[i];
      w -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      w -= lr_ * wd_ * w;
      *params[i] = w;
    }
  }

 private:
  static constexpr double beta1_ = 0.9;
  static constexpr double beta2_ = 0.999;
  static constexpr double eps_ = 1e-8;
  double lr_;
  double wd_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

void copy_params(const std::vector<double*>& from, const std::vector<double*>& to) {
  for (std::size_t i = 0; i < from.size(); ++i) *to[i] = *from[i];
}

}  // namespace

TrainResult train(MlpModel& model, const Matrix& features, const BagStructure& bags,
                  std::span<const double> instance_targets,
                  std::span<const double> instance_weights, std::span<const double> bag_targets,
                  const Matrix& val_features, std::span<const int> val_labels,
                  const TrainConfig& cfg, LossMode mode) {
  if (bags.num_bags() == 0) throw std::invalid_argument("train: no bags");
  if (bag_targets.size() != bags.num_bags())
    throw std::invalid_argument("train: bag target count mismatch");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (cfg.patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  {
    bool has0 = false, has1 = false;
    for (int l : val_labels) (l ? has1 : has0) = true;
    if (!has0 || !has1)
      throw std::invalid_argument("train: degenerate validation set (single class)");
  }

  const std::size_t bag_len = bags.bag_size ? bags.bag_size : bags.bags.front().size();
  const std::size_t bags_per_batch =
      std::clamp<std::size_t>(cfg.batch_size / std::max<std::size_t>(bag_len, 1), 1,
                              bags.num_bags());

  std::vector<std::size_t> bag_order(bags.num_bags());
  std::iota(bag_order.begin(), bag_order.end(), 0);
  auto shuffle_rng = make_rng(mix_seed(cfg.seed, 0xba9));

  MlpGradients grads = MlpGradients::zeros_like(model);
  const std::vector<double*> params = param_ptrs(model);
  std::vector<double*> gptrs = grad_ptrs(grads);
  AdamOptimizer adam(params.size(), cfg.learning_rate, cfg.weight_decay);

  MlpModel best = model;
  std::vector<double*> best_ptrs = param_ptrs(best);
  EarlyStopper stopper(cfg.patience);
  TrainResult result;

  Matrix batch_x;
  std::vector<std::size_t> offsets;
  std::vector<double> targets, weights, props;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(bag_order.begin(), bag_order.end(), shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < bag_order.size(); start += bags_per_batch) {
      const std::size_t stop = std::min(start + bags_per_batch, bag_order.size());
      std::size_t rows = 0;
      for (std::size_t b = start; b < stop; ++b) rows += bags.bags[bag_order[b]].size();

      batch_x = Matrix(rows, features.cols);
      offsets.assign(1, 0);
      targets.clear();
      weights.clear();
      props.clear();
      std::size_t r = 0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t bag_id = bag_order[b];
        for (std::size_t idx : bags.bags[bag_id]) {
          auto src = features.row(idx);
          std::copy(src.begin(), src.end(), batch_x.row(r++).begin());
          if (mode == LossMode::Aggregate) {
            targets.push_back(instance_targets[idx]);
            if (!instance_weights.empty()) weights.push_back(instance_weights[idx]);
          }
        }
        offsets.push_back(r);
        props.push_back(bag_targets[bag_id]);
      }

      grads.zero();
      double loss = 0.0;
      if (mode == LossMode::Aggregate) {
        loss = aggregate_loss_batch(model, batch_x, offsets, targets, weights, props,
                                    cfg.lambda_a, &grads);
      } else {
        loss = dllp_loss_batch(model, batch_x, offsets, props, &grads);
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(start / bags_per_batch));
      epoch_loss += loss;
      adam.step(params, gptrs);
    }

    const std::vector<double> val_scores = score_rows(model, val_features);
    for (double s : val_scores)
      if (!std::isfinite(s))
        throw std::runtime_error("train: non-finite validation score at epoch " +
                                 std::to_string(epoch) + " (diverged?)");
    const double val_auc = auroc(val_scores, val_labels);
    result.log.push_back({epoch, epoch_loss / static_cast<double>(bags.num_bags()), val_auc});
    result.epochs_run = epoch;

    const bool stop = stopper.observe(epoch, val_auc);
    if (stopper.improved_last()) copy_params(params, best_ptrs);
    if (stop) break;
  }

  copy_params(best_ptrs, params);  // restore best-validation weights
  result.best_epoch = stopper.best_epoch();
  result.best_val_auroc = stopper.best_metric();
  return result;
}

void save_train_log_csv(const TrainResult& result, const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : result.log)
    rows.push_back({static_cast<double>(e.epoch), e.train_loss, e.val_auroc});
  csv::write_numeric(path, {"epoch", "train_loss", "val_auroc"}, rows);
}

}  // namespace llp
