#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "llp/bagging.hpp"
#include "llp/dataset.hpp"
#include "llp/metrics.hpp"
#include "llp/rng.hpp"
#include "llp/trainer.hpp"

using namespace llp;

namespace {

struct Fixture {
  LabeledDataset ds;
  DataSplit sp;
  BagStructure bags;
  Matrix val_x;
  std::vector<int> val_y;
  Matrix test_x;
  std::vector<int> test_y;

  Fixture(std::size_t m, double separation, std::size_t bag_size, std::uint64_t seed) {
    ds = make_synthetic(m, 2, separation, seed);
    sp = split(ds, 0.7, 0.15, 0.15, seed + 1);
    bags = generate_bags(sp.train_indices, bag_size, *ds.labels, seed + 2);
    val_x = gather_rows(ds.features, sp.validation_indices);
    test_x = gather_rows(ds.features, sp.test_indices);
    for (std::size_t i : sp.validation_indices) val_y.push_back((*ds.labels)[i]);
    for (std::size_t i : sp.test_indices) test_y.push_back((*ds.labels)[i]);
  }

  std::vector<double> true_targets() const {
    std::vector<double> t(ds.size(), 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) t[i] = (*ds.labels)[i];
    return t;
  }

  std::vector<double> proportions() const {
    std::vector<double> p;
    for (std::size_t b = 0; b < bags.num_bags(); ++b)
      p.push_back(static_cast<double>(bags.counts[b]) / static_cast<double>(bags.bag_size));
    return p;
  }
};

}  // namespace

TEST_CASE("early stopper: peak at epoch 3 stops at epoch 23 and keeps epoch 3") {
  EarlyStopper stopper(20);
  CHECK_FALSE(stopper.observe(1, 0.6));
  CHECK_FALSE(stopper.observe(2, 0.7));
  CHECK_FALSE(stopper.observe(3, 0.8));
  bool stopped = false;
  for (std::size_t epoch = 4; epoch <= 30 && !stopped; ++epoch) {
    stopped = stopper.observe(epoch, 0.8 - 0.001 * static_cast<double>(epoch));
    if (stopped) CHECK(epoch == 23);
  }
  CHECK(stopped);
  CHECK(stopper.best_epoch() == 3);
  CHECK(stopper.best_metric() == doctest::Approx(0.8));
}

TEST_CASE("early stopper: equal metric is not an improvement") {
  EarlyStopper stopper(2);
  CHECK_FALSE(stopper.observe(1, 0.5));
  CHECK_FALSE(stopper.observe(2, 0.5));
  CHECK(stopper.observe(3, 0.5));
  CHECK(stopper.best_epoch() == 1);
}

TEST_CASE("instance-supervised training reaches AUROC 0.99 on separated Gaussians") {
  Fixture f(4000, 6.0, 32, 17);
  MlpConfig mlp;
  mlp.hidden_dims = {64, 32};
  MlpModel model = MlpModel::init(2, mlp, 5);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.lambda_a = 0.0;
  cfg.batch_size = 512;
  cfg.max_epochs = 40;
  cfg.patience = 10;
  cfg.seed = 3;
  const TrainResult r = train(model, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                              f.val_x, f.val_y, cfg, LossMode::Aggregate);
  CHECK(r.best_val_auroc >= 0.99);
  CHECK(auroc(score_rows(model, f.test_x), f.test_y) >= 0.99);
}

TEST_CASE("restore-best guarantee: returned model scores the best validation AUROC") {
  Fixture f(600, 2.0, 8, 23);
  MlpConfig mlp;
  mlp.hidden_dims = {16, 8};
  MlpModel model = MlpModel::init(2, mlp, 7);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.lambda_a = 1.0;
  cfg.batch_size = 64;
  cfg.max_epochs = 30;
  cfg.patience = 5;
  cfg.seed = 11;
  const TrainResult r = train(model, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                              f.val_x, f.val_y, cfg, LossMode::Aggregate);
  const double restored = auroc(score_rows(model, f.val_x), f.val_y);
  CHECK(restored == doctest::Approx(r.best_val_auroc).epsilon(1e-12));
  double best_logged = 0.0;
  for (const auto& e : r.log) best_logged = std::max(best_logged, e.val_auroc);
  CHECK(restored == doctest::Approx(best_logged).epsilon(1e-12));
  CHECK(r.log.size() == r.epochs_run);
}

TEST_CASE("training is deterministic in the seed") {
  Fixture f(400, 3.0, 8, 29);
  MlpConfig mlp;
  mlp.hidden_dims = {8};
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.max_epochs = 8;
  cfg.seed = 5;

  MlpModel a = MlpModel::init(2, mlp, 9);
  MlpModel b = MlpModel::init(2, mlp, 9);
  const TrainResult ra = train(a, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                               f.val_x, f.val_y, cfg, LossMode::Aggregate);
  const TrainResult rb = train(b, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                               f.val_x, f.val_y, cfg, LossMode::Aggregate);
  CHECK(ra.best_epoch == rb.best_epoch);
  for (std::size_t l = 0; l < a.weights.size(); ++l) CHECK(a.weights[l].data == b.weights[l].data);
  for (std::size_t e = 0; e < ra.log.size(); ++e) {
    CHECK(ra.log[e].train_loss == rb.log[e].train_loss);
    CHECK(ra.log[e].val_auroc == rb.log[e].val_auroc);
  }
}

TEST_CASE("dllp mode trains without instance targets") {
  Fixture f(800, 4.0, 8, 31);
  MlpConfig mlp;
  mlp.hidden_dims = {16, 8};
  MlpModel model = MlpModel::init(2, mlp, 13);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 64;
  cfg.max_epochs = 60;
  cfg.patience = 15;
  cfg.seed = 7;
  const TrainResult r = train(model, f.ds.features, f.bags, {}, {}, f.proportions(), f.val_x,
                              f.val_y, cfg, LossMode::Dllp);
  // separable data with small bags: DLLP should order the classes well
  CHECK(r.best_val_auroc >= 0.9);
}

TEST_CASE("divergent training reports the failing epoch instead of producing NaNs") {
  Fixture f(100, 2.0, 4, 39);
  MlpConfig mlp;
  mlp.hidden_dims = {4};
  MlpModel model = MlpModel::init(2, mlp, 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.max_epochs = 5;
  cfg.seed = 1;
  CHECK_THROWS_WITH_AS(train(model, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                             f.val_x, f.val_y, cfg, LossMode::Aggregate),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("degenerate validation set is rejected") {
  Fixture f(100, 2.0, 4, 37);
  std::vector<int> all_ones(f.val_y.size(), 1);
  MlpConfig mlp;
  mlp.hidden_dims = {4};
  MlpModel model = MlpModel::init(2, mlp, 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, f.ds.features, f.bags, f.true_targets(), {}, f.proportions(),
                        f.val_x, all_ones, cfg, LossMode::Aggregate),
                  std::invalid_argument);
}

TEST_CASE("the bag head helps when pseudo-labels are noisy on small bags") {
  // Flip a quarter of the instance targets; the bag-proportion term carries
  // clean aggregate information, so some lambda_a > 0 beats lambda_a = 0.
  double best_zero = 0.0, best_positive = 0.0;
  for (std::uint64_t seed : {41, 43, 45}) {
    Fixture f(800, 2.5, 8, seed);
    std::vector<double> noisy = f.true_targets();
    std::mt19937_64 rng(seed * 7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i : f.sp.train_indices)
      if (unif(rng) < 0.25) noisy[i] = 1.0 - noisy[i];

    for (double lambda_a : {0.0, 4.0}) {
      MlpConfig mlp;
      mlp.hidden_dims = {16, 8};
      MlpModel model = MlpModel::init(2, mlp, seed);
      TrainConfig cfg;
      cfg.learning_rate = 5e-3;
      cfg.lambda_a = lambda_a;
      cfg.batch_size = 64;
      cfg.max_epochs = 40;
      cfg.patience = 10;
      cfg.seed = seed + 1;
      const TrainResult r = train(model, f.ds.features, f.bags, noisy, {}, f.proportions(),
                                  f.val_x, f.val_y, cfg, LossMode::Aggregate);
      (lambda_a == 0.0 ? best_zero : best_positive) += r.best_val_auroc;
    }
  }
  CHECK(best_positive > best_zero);
}
