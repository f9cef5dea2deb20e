#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "llp/bagging.hpp"
#include "llp/mlp.hpp"

namespace llp {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled
  double lambda_a = 1.0;
  std::size_t batch_size = 128;  // instances; rounded down to whole bags, at least one bag
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
};

enum class LossMode { Aggregate, Dllp };

// Keras-style early stopping on a maximized metric: improvement means
// strictly greater than the best seen; stop once `patience` consecutive
// epochs pass without improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool observe(std::size_t epoch, double metric) {
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      improved_ = true;
      return false;
    }
    improved_ = false;
    return ++stale_ >= patience_;
  }

  double best_metric() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  bool improved_last() const { return improved_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  bool improved_ = false;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auroc = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_auroc = 0.0;
  std::size_t epochs_run = 0;
};

// Adam with decoupled weight decay; bags form the mini-batches, bag order is
// reshuffled every epoch (deterministic in cfg.seed). After every epoch the
// validation AUROC of the instance head is computed; training stops when it
// fails to improve for cfg.patience consecutive epochs and the
// best-validation parameters are restored.
//
// `bags` indexes rows of `features`. instance_targets (and optional
// instance_weights) are indexed the same way and are read only at bagged
// rows; bag_targets are per-bag proportions. In Dllp mode the instance
// arrays are ignored and may be empty.
TrainResult train(MlpModel& model, const Matrix& features, const BagStructure& bags,
                  std::span<const double> instance_targets,
                  std::span<const double> instance_weights, std::span<const double> bag_targets,
                  const Matrix& val_features, std::span<const int> val_labels,
                  const TrainConfig& cfg, LossMode mode);

void save_train_log_csv(const TrainResult& result, const std::string& path);

}  // namespace llp
