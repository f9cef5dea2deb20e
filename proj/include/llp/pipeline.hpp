#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/bagging.hpp"
#include "llp/bp_engine.hpp"
#include "llp/dataset.hpp"
#include "llp/knn_graph.hpp"
#include "llp/pseudo_labels.hpp"
#include "llp/trainer.hpp"

namespace llp {

// Parameters of one refinement iteration (graph + Gibbs + BP + training).
struct StageConfig {
  std::size_t k = 1;
  double delta_d = std::numeric_limits<double>::infinity();
  DistanceMetric metric = DistanceMetric::Cosine;
  KernelSpec kernel{};
  double lambda_b = 1.0;
  double lambda_s = 1.0;
  std::size_t bp_rounds = 100;  // T
  double bp_damping = 0.0;
  double bp_tol = 1e-8;
  double tau = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::Hard;
  double knn_constraint_fraction = 1.0;
  TrainConfig train{};
};

struct DpNoiseConfig {
  double epsilon = 1.0;
  double delta = 1e-5;
  bool rounded_counts = true;  // feed round(p*B) into the potentials vs p*B as-is
};

struct PipelineConfig {
  std::size_t iterations = 2;  // R
  std::vector<StageConfig> stages;  // stage r uses stages[min(r, stages.size()-1)]
  MlpConfig mlp{};
  std::optional<DpNoiseConfig> noise;
  std::uint64_t seed = 0;
  bool compute_stability = false;
  std::string out_dir;  // when set, per-iteration artifact files are written here

  const StageConfig& stage(std::size_t r) const;
};

struct StageTimings {
  double setup_s = 0.0;  // graph + Ising assembly
  double bp_s = 0.0;
  double train_s = 0.0;
  double total_s = 0.0;
};

struct IterationReport {
  std::size_t iteration = 0;
  double pseudo_label_auroc = std::numeric_limits<double>::quiet_NaN();
  double knn_score = std::numeric_limits<double>::quiet_NaN();
  double val_auroc = std::numeric_limits<double>::quiet_NaN();
  double test_auroc = std::numeric_limits<double>::quiet_NaN();
  BpDiagnostics bp;
  MooijResult mooij;
  double spectral_norm = std::numeric_limits<double>::quiet_NaN();
  double beta_threshold = std::numeric_limits<double>::quiet_NaN();
  StageTimings times;
  TrainResult training;
};

struct PipelineResult {
  MlpModel model;  // final instance predictor (bag head unused at test time)
  std::vector<IterationReport> reports;
};

// A stage failure aborts the run but keeps the reports of the iterations
// that finished.
class PipelineStageError : public std::runtime_error {
 public:
  PipelineStageError(const std::string& what, std::vector<IterationReport> completed)
      : std::runtime_error(what), completed_reports(std::move(completed)) {}
  std::vector<IterationReport> completed_reports;
};

// Algorithm: per iteration r, build the kNN graph and Ising model on the
// current covariates of the train instances, run sum-product BP, threshold
// the marginals into pseudo-labels, train the MLP (inputs are always the
// original features), then replace the covariates with the embedding-tap
// outputs for all instances. Bags must be over train indices only.
PipelineResult run_pipeline(const LabeledDataset& ds, const DataSplit& split,
                            const BagStructure& bags, const PipelineConfig& cfg);

// DLLP baseline: a single MLP fit of bag-mean scores to bag proportions; no
// BP, no pseudo-labels, no bag head.
PipelineResult run_dllp(const LabeledDataset& ds, const DataSplit& split,
                        const BagStructure& bags, const PipelineConfig& cfg);

void save_metrics_csv(const std::vector<IterationReport>& reports, const std::string& path);

}  // namespace llp
