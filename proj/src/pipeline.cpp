#include "llp/pipeline.hpp"

#include <chrono>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/gibbs_model.hpp"
#include "llp/metrics.hpp"
#include "llp/rng.hpp"

namespace llp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Remaps bag indices from dataset rows to rows of the compacted train matrix.
BagStructure localize_bags(const BagStructure& bags, const std::vector<std::size_t>& train_indices,
                           std::size_t num_rows) {
  std::vector<std::size_t> local(num_rows, num_rows);
  for (std::size_t t = 0; t < train_indices.size(); ++t) local[train_indices[t]] = t;
  BagStructure out;
  out.bag_size = bags.bag_size;
  out.counts = bags.counts;
  out.bags.reserve(bags.num_bags());
  for (const auto& bag : bags.bags) {
    std::vector<std::size_t> b;
    b.reserve(bag.size());
    for (std::size_t idx : bag) {
      if (idx >= num_rows || local[idx] == num_rows)
        throw std::invalid_argument("pipeline: bag index is not a train instance");
      b.push_back(local[idx]);
    }
    out.bags.push_back(std::move(b));
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

void write_marginals_csv(const MarginalVector& marginals,
                         const std::vector<std::size_t>& global_indices,
                         const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < marginals.probs.size(); ++i)
    rows.push_back({static_cast<double>(global_indices[i]), marginals.probs[i]});
  csv::write_numeric(path, {"instance_index", "p1"}, rows);
}

void write_pseudo_csv(const PseudoLabelSet& pl, const std::vector<std::size_t>& global_indices,
                      const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < pl.soft.size(); ++i)
    rows.push_back({static_cast<double>(global_indices[i]), static_cast<double>(pl.hard[i]),
                    pl.soft[i], pl.weights.empty() ? 1.0 : pl.weights[i]});
  csv::write_numeric(path, {"instance_index", "hard", "soft", "weight"}, rows);
}

}  // namespace

const StageConfig& PipelineConfig::stage(std::size_t r) const {
  static const StageConfig kDefault{};
  if (stages.empty()) return kDefault;
  return stages[std::min(r, stages.size() - 1)];
}

PipelineResult run_pipeline(const LabeledDataset& ds, const DataSplit& split,
                            const BagStructure& bags, const PipelineConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("pipeline: iterations must be >= 1");
  if (split.train_indices.empty() || split.validation_indices.empty() ||
      split.test_indices.empty())
    throw std::invalid_argument("pipeline: empty split");

  const BagStructure local_bags = localize_bags(bags, split.train_indices, ds.size());

  // Noisy bag proportions are drawn once and reused across iterations.
  std::vector<double> bp_counts(local_bags.counts.begin(), local_bags.counts.end());
  std::vector<double> bag_targets(local_bags.num_bags());
  const double bag_len = static_cast<double>(local_bags.bag_size);
  for (std::size_t b = 0; b < local_bags.num_bags(); ++b)
    bag_targets[b] = static_cast<double>(local_bags.counts[b]) / bag_len;
  if (cfg.noise) {
    const NoisyBagLabels noisy =
        add_label_dp_noise(local_bags, cfg.noise->epsilon, cfg.noise->delta,
                           mix_seed(cfg.seed, 0xd9));
    for (std::size_t b = 0; b < local_bags.num_bags(); ++b) {
      bag_targets[b] = noisy.proportions[b];
      bp_counts[b] = cfg.noise->rounded_counts
                         ? static_cast<double>(rounded_count(noisy.proportions[b],
                                                             local_bags.bag_size))
                         : noisy.proportions[b] * bag_len;
    }
  }

  const Matrix train_x = gather_rows(ds.features, split.train_indices);
  const Matrix val_x = gather_rows(ds.features, split.validation_indices);
  const Matrix test_x = gather_rows(ds.features, split.test_indices);

  std::vector<int> train_labels, val_labels, test_labels;
  if (ds.labels) {
    train_labels = gather_labels(*ds.labels, split.train_indices);
    val_labels = gather_labels(*ds.labels, split.validation_indices);
    test_labels = gather_labels(*ds.labels, split.test_indices);
  }
  if (val_labels.empty())
    throw std::invalid_argument("pipeline: validation labels required for early stopping");

  PipelineResult result;
  Matrix z_train = train_x;  // covariates for the pseudo-labeling step

  for (std::size_t r = 0; r < cfg.iterations; ++r) {
    const StageConfig& st = cfg.stage(r);
    IterationReport report;
    report.iteration = r;
    const auto iter_start = Clock::now();
    try {
      // Pseudo-labeling: graph + Ising + sum-product on the current covariates.
      auto t0 = Clock::now();
      NeighborGraph graph = build_graph(z_train, st.k, st.delta_d, st.metric);
      if (st.knn_constraint_fraction < 1.0)
        graph = subsample_constraints(graph, st.knn_constraint_fraction,
                                      mix_seed(cfg.seed, 0x5b + r));
      const IsingModel ising =
          build_ising(z_train, local_bags, bp_counts, graph, st.kernel, st.lambda_b, st.lambda_s);
      report.times.setup_s = seconds_since(t0);

      t0 = Clock::now();
      BpOptions bp_opt;
      bp_opt.max_rounds = st.bp_rounds;
      bp_opt.damping = st.bp_damping;
      bp_opt.tol = st.bp_tol;
      const MarginalVector marginals = sum_product(ising, bp_opt, &report.bp);
      report.times.bp_s = seconds_since(t0);

      report.mooij = mooij_contraction_check(ising);
      if (cfg.compute_stability && ising.num_edges() > 0) {
        const StabilityResult stab = linearized_stability(ising);
        report.spectral_norm = stab.spectral_norm;
        report.beta_threshold = stab.beta_threshold;
      }

      const PseudoLabelSet pseudo = threshold(marginals, st.tau, st.threshold_mode);
      if (!train_labels.empty()) {
        report.pseudo_label_auroc = pseudo_label_auroc(marginals, train_labels);
        if (graph.num_directed_edges() > 0)
          report.knn_score = knn_label_score(graph, train_labels);
      }

      // Supervision targets over dataset rows (only bagged rows are read).
      std::vector<double> instance_targets(ds.size(), 0.0);
      std::vector<double> instance_weights;
      const bool soft = st.threshold_mode == ThresholdMode::Soft;
      if (st.threshold_mode == ThresholdMode::SoftWeighted)
        instance_weights.assign(ds.size(), 1.0);
      for (std::size_t t = 0; t < split.train_indices.size(); ++t) {
        instance_targets[split.train_indices[t]] =
            soft ? pseudo.soft[t] : static_cast<double>(pseudo.hard[t]);
        if (!instance_weights.empty())
          instance_weights[split.train_indices[t]] = pseudo.weights[t];
      }

      t0 = Clock::now();
      TrainConfig tc = st.train;
      tc.seed = mix_seed(cfg.seed, 0x7a + r);
      MlpModel model = MlpModel::init(ds.dim(), cfg.mlp, mix_seed(cfg.seed, 0x11 + r));
      report.training = train(model, ds.features, bags, instance_targets, instance_weights,
                              bag_targets, val_x, val_labels, tc, LossMode::Aggregate);
      report.times.train_s = seconds_since(t0);

      report.val_auroc = report.training.best_val_auroc;
      if (!test_labels.empty()) report.test_auroc = auroc(score_rows(model, test_x), test_labels);

      if (!cfg.out_dir.empty()) {
        const std::string suffix = "_iter" + std::to_string(r) + ".csv";
        write_marginals_csv(marginals, split.train_indices, cfg.out_dir + "/marginals" + suffix);
        write_pseudo_csv(pseudo, split.train_indices, cfg.out_dir + "/pseudo_labels" + suffix);
        save_mlp_json(model, cfg.out_dir + "/model_iter" + std::to_string(r) + ".json");
        save_train_log_csv(report.training,
                           cfg.out_dir + "/train_log_iter" + std::to_string(r) + ".csv");
      }

      // Refined covariates for the next iteration come from the embedding tap.
      if (r + 1 < cfg.iterations) z_train = embed_rows(model, train_x);

      report.times.total_s = seconds_since(iter_start);
      result.reports.push_back(std::move(report));
      result.model = std::move(model);
    } catch (const std::exception& e) {
      throw PipelineStageError("iteration " + std::to_string(r) + ": " + e.what(),
                               std::move(result.reports));
    }
  }
  return result;
}

PipelineResult run_dllp(const LabeledDataset& ds, const DataSplit& split,
                        const BagStructure& bags, const PipelineConfig& cfg) {
  if (split.train_indices.empty() || split.validation_indices.empty() ||
      split.test_indices.empty())
    throw std::invalid_argument("pipeline: empty split");

  const BagStructure local_bags = localize_bags(bags, split.train_indices, ds.size());
  std::vector<double> bag_targets(local_bags.num_bags());
  const double bag_len = static_cast<double>(local_bags.bag_size);
  for (std::size_t b = 0; b < local_bags.num_bags(); ++b)
    bag_targets[b] = static_cast<double>(local_bags.counts[b]) / bag_len;
  if (cfg.noise) {
    const NoisyBagLabels noisy =
        add_label_dp_noise(local_bags, cfg.noise->epsilon, cfg.noise->delta,
                           mix_seed(cfg.seed, 0xd9));
    bag_targets = noisy.proportions;
  }

  const Matrix val_x = gather_rows(ds.features, split.validation_indices);
  const Matrix test_x = gather_rows(ds.features, split.test_indices);
  std::vector<int> val_labels, test_labels;
  if (ds.labels) {
    val_labels = gather_labels(*ds.labels, split.validation_indices);
    test_labels = gather_labels(*ds.labels, split.test_indices);
  }
  if (val_labels.empty())
    throw std::invalid_argument("pipeline: validation labels required for early stopping");

  PipelineResult result;
  IterationReport report;
  report.iteration = 0;
  const auto t0 = Clock::now();

  TrainConfig tc = cfg.stage(0).train;
  tc.seed = mix_seed(cfg.seed, 0x7a);
  MlpModel model = MlpModel::init(ds.dim(), cfg.mlp, mix_seed(cfg.seed, 0x11));
  report.training = train(model, ds.features, bags, {}, {}, bag_targets, val_x, val_labels, tc,
                          LossMode::Dllp);
  report.times.train_s = seconds_since(t0);
  report.val_auroc = report.training.best_val_auroc;
  if (!test_labels.empty()) report.test_auroc = auroc(score_rows(model, test_x), test_labels);

  if (!cfg.out_dir.empty()) {
    save_mlp_json(model, cfg.out_dir + "/model_iter0.json");
    save_train_log_csv(report.training, cfg.out_dir + "/train_log_iter0.csv");
  }

  report.times.total_s = seconds_since(t0);
  result.reports.push_back(std::move(report));
  result.model = std::move(model);
  return result;
}

void save_metrics_csv(const std::vector<IterationReport>& reports, const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : reports)
    rows.push_back({static_cast<double>(r.iteration), r.pseudo_label_auroc, r.knn_score,
                    r.val_auroc, r.test_auroc, static_cast<double>(r.bp.rounds_run),
                    r.bp.converged ? 1.0 : 0.0, r.mooij.value, r.times.setup_s, r.times.bp_s,
                    r.times.train_s, r.times.total_s});
  csv::write_numeric(path,
                     {"iteration", "pseudo_label_auroc", "knn_score", "val_auroc", "test_auroc",
                      "bp_rounds", "bp_converged", "mooij_value", "setup_s", "bp_s", "train_s",
                      "total_s"},
                     rows);
}

}  // namespace llp
