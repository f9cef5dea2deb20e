#include "llp/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "llp/version.hpp"

#include "llp/bagging.hpp"
#include "llp/bp_engine.hpp"
#include "llp/csv.hpp"
#include "llp/dataset.hpp"
#include "llp/gibbs_model.hpp"
#include "llp/knn_graph.hpp"
#include "llp/metrics.hpp"
#include "llp/parallel.hpp"
#include "llp/pipeline.hpp"
#include "llp/pseudo_labels.hpp"
#include "llp/rng.hpp"
#include "llp/trainer.hpp"

namespace llp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// ---- shared flag bundles -------------------------------------------------

struct GraphFlags {
  std::size_t k = 1;
  double delta_d = std::numeric_limits<double>::infinity();
  std::string metric = "cosine";
  std::string kernel = "matern";
  double gamma = 1.0;
  double matern_nu = 1.5;
  double length_scale = 1.0;
  double knn_fraction = 1.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--k", k, "neighbors per instance")->check(CLI::PositiveNumber);
    cmd->add_option("--delta-d", delta_d, "distance threshold for neighbor edges");
    cmd->add_option("--metric", metric, "distance metric")
        ->check(CLI::IsMember({"cosine", "euclidean"}));
    cmd->add_option("--kernel", kernel, "similarity kernel")
        ->check(CLI::IsMember({"rbf", "matern"}));
    cmd->add_option("--gamma", gamma, "RBF gamma");
    cmd->add_option("--matern-nu", matern_nu, "Matern smoothness (0.5, 1.5 or 2.5)");
    cmd->add_option("--length-scale", length_scale, "Matern length scale");
    cmd->add_option("--knn-fraction", knn_fraction,
                    "fraction of directed neighbor constraints to keep")
        ->check(CLI::Range(0.0, 1.0));
  }

  KernelSpec kernel_spec() const {
    KernelSpec spec;
    spec.kind = parse_kernel_kind(kernel);
    spec.gamma = gamma;
    spec.nu = matern_nu;
    spec.length_scale = length_scale;
    return spec;
  }
};

struct BpFlags {
  double lambda_b = 1.0;
  double lambda_s = 1.0;
  std::size_t rounds = 100;
  double damping = 0.0;
  double tol = 1e-8;
  double tau = 0.5;
  std::string threshold_mode = "hard";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lambda-b", lambda_b, "bag-constraint weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-s", lambda_s, "similarity-constraint weight")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--T,--rounds", rounds, "belief propagation rounds")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--damping", damping, "message damping in [0,1)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--tol", tol, "early-stop tolerance on message delta (0 disables)");
    cmd->add_option("--tau", tau, "pseudo-label threshold");
    cmd->add_option("--threshold-mode", threshold_mode, "pseudo-label mode")
        ->check(CLI::IsMember({"hard", "soft", "soft_weighted"}));
  }
};

struct TrainFlags {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double lambda_a = 1.0;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t patience = 20;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t pool_hidden = 0;
  std::size_t embedding_layer = 0;
  std::string pooling = "mean";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--weight-decay", weight_decay, "decoupled weight decay")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-a", lambda_a, "bag-loss weight in the composite loss")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--batch-size", batch_size, "mini-batch size in instances")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-epochs", max_epochs, "epoch cap")->check(CLI::PositiveNumber);
    cmd->add_option("--patience", patience, "early-stopping patience in epochs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", hidden, "hidden layer widths")->delimiter(',');
    cmd->add_option("--pool-hidden", pool_hidden, "bag-head hidden width (0 = auto)");
    cmd->add_option("--embedding-layer", embedding_layer,
                    "embedding tap layer index (0 = default L-2)");
    cmd->add_option("--pooling", pooling, "bag pooling")
        ->check(CLI::IsMember({"mean", "sum", "max"}));
  }

  MlpConfig mlp_config() const {
    MlpConfig cfg;
    cfg.hidden_dims = hidden;
    cfg.pool_hidden = pool_hidden;
    cfg.embedding_layer = embedding_layer;
    cfg.pooling = parse_pooling(pooling);
    return cfg;
  }

  TrainConfig train_config() const {
    TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.weight_decay = weight_decay;
    cfg.lambda_a = lambda_a;
    cfg.batch_size = batch_size;
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    return cfg;
  }
};

// ---- manifest helpers ------------------------------------------------------

json stage_to_json(const StageConfig& st) {
  json j;
  j["k"] = st.k;
  j["delta_d"] = json_number(st.delta_d);
  j["metric"] = metric_name(st.metric);
  j["kernel"] = kernel_name(st.kernel.kind);
  j["gamma"] = st.kernel.gamma;
  j["matern_nu"] = st.kernel.nu;
  j["length_scale"] = st.kernel.length_scale;
  j["lambda_b"] = st.lambda_b;
  j["lambda_s"] = st.lambda_s;
  j["T"] = st.bp_rounds;
  j["damping"] = st.bp_damping;
  j["tol"] = st.bp_tol;
  j["tau"] = st.tau;
  j["threshold_mode"] = threshold_mode_name(st.threshold_mode);
  j["knn_fraction"] = st.knn_constraint_fraction;
  j["lr"] = st.train.learning_rate;
  j["weight_decay"] = st.train.weight_decay;
  j["lambda_a"] = st.train.lambda_a;
  j["batch_size"] = st.train.batch_size;
  j["max_epochs"] = st.train.max_epochs;
  j["patience"] = st.train.patience;
  return j;
}

json report_to_json(const IterationReport& r) {
  json j;
  j["iteration"] = r.iteration;
  j["pseudo_label_auroc"] = json_number(r.pseudo_label_auroc);
  j["knn_score"] = json_number(r.knn_score);
  j["val_auroc"] = json_number(r.val_auroc);
  j["test_auroc"] = json_number(r.test_auroc);
  j["best_epoch"] = r.training.best_epoch;
  j["epochs_run"] = r.training.epochs_run;
  j["timings"] = {{"setup_s", r.times.setup_s},
                  {"bp_s", r.times.bp_s},
                  {"train_s", r.times.train_s},
                  {"total_s", r.times.total_s}};
  j["bp"] = {{"rounds_run", r.bp.rounds_run},
             {"converged", r.bp.converged},
             {"delta_trace", r.bp.message_deltas},
             {"mooij_value", r.mooij.value},
             {"mooij_holds", r.mooij.holds},
             {"spectral_norm", json_number(r.spectral_norm)},
             {"beta_threshold", json_number(r.beta_threshold)}};
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// ---- pipeline/dllp shared setup -------------------------------------------

struct RunFlags {
  std::string data;
  std::string labels_col = "label";
  std::size_t bag_size = 32;
  std::uint64_t seed = 0;
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  bool standardize = false;
  std::string out_dir = "out";
  int threads = 0;
  double dp_epsilon = 0.0;
  double dp_delta = 1e-5;
  bool dp_real_proportions = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "numeric CSV with header row")->required();
    cmd->add_option("--labels-col", labels_col, "label column name");
    cmd->add_option("--bag-size", bag_size, "instances per bag")->check(CLI::Range(2, 1 << 20));
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--train-frac", train_frac, "train fraction");
    cmd->add_option("--val-frac", val_frac, "validation fraction");
    cmd->add_option("--test-frac", test_frac, "test fraction");
    cmd->add_flag("--standardize", standardize, "standardize feature columns");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--threads", threads, "cap on worker threads (0 = all)");
    cmd->add_option("--dp-epsilon", dp_epsilon, "label-DP epsilon (0 disables noise)");
    cmd->add_option("--dp-delta", dp_delta, "label-DP delta");
    cmd->add_flag("--dp-real-proportions", dp_real_proportions,
                  "feed noisy proportions into BP unrounded");
  }
};

void apply_stage_override(StageConfig& st, const std::string& key, const std::string& value) {
  const auto d = [&] { return std::stod(value); };
  const auto u = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  if (key == "k") st.k = u();
  else if (key == "delta-d") st.delta_d = d();
  else if (key == "metric") st.metric = parse_metric(value);
  else if (key == "kernel") st.kernel.kind = parse_kernel_kind(value);
  else if (key == "gamma") st.kernel.gamma = d();
  else if (key == "matern-nu") st.kernel.nu = d();
  else if (key == "length-scale") st.kernel.length_scale = d();
  else if (key == "lambda-b") st.lambda_b = d();
  else if (key == "lambda-s") st.lambda_s = d();
  else if (key == "T" || key == "rounds") st.bp_rounds = u();
  else if (key == "damping") st.bp_damping = d();
  else if (key == "tol") st.bp_tol = d();
  else if (key == "tau") st.tau = d();
  else if (key == "threshold-mode") st.threshold_mode = parse_threshold_mode(value);
  else if (key == "knn-fraction") st.knn_constraint_fraction = d();
  else if (key == "lr") st.train.learning_rate = d();
  else if (key == "weight-decay") st.train.weight_decay = d();
  else if (key == "lambda-a") st.train.lambda_a = d();
  else if (key == "batch-size") st.train.batch_size = u();
  else if (key == "max-epochs") st.train.max_epochs = u();
  else if (key == "patience") st.train.patience = u();
  else throw std::invalid_argument("unknown stage override key '" + key + "'");
}

// Overrides look like "2:lambda-b=0.1" (1-based iteration index).
void apply_stage_overrides(std::vector<StageConfig>& stages,
                           const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto colon = ov.find(':');
    const auto eq = ov.find('=', colon == std::string::npos ? 0 : colon);
    if (colon == std::string::npos || eq == std::string::npos)
      throw std::invalid_argument("bad stage override '" + ov + "', expected ITER:KEY=VALUE");
    const std::size_t iter = std::stoull(ov.substr(0, colon));
    if (iter < 1 || iter > stages.size())
      throw std::invalid_argument("stage override iteration out of range in '" + ov + "'");
    apply_stage_override(stages[iter - 1], ov.substr(colon + 1, eq - colon - 1),
                         ov.substr(eq + 1));
  }
}

struct LoadedRun {
  LabeledDataset ds;
  DataSplit split;
  BagStructure bags;
};

LoadedRun load_run_inputs(const RunFlags& rf) {
  LoadedRun run;
  run.ds = load_csv(rf.data, rf.labels_col);
  if (!run.ds.labels)
    throw std::runtime_error("dataset has no label column '" + rf.labels_col +
                             "' (needed for bag counts and evaluation)");
  if (rf.standardize) standardize_columns(run.ds.features);
  run.split = split(run.ds, rf.train_frac, rf.val_frac, rf.test_frac, mix_seed(rf.seed, 0x51));
  run.bags = generate_bags(run.split.train_indices, rf.bag_size, *run.ds.labels,
                           mix_seed(rf.seed, 0xba6));
  return run;
}

json run_to_manifest(const std::string& command, const RunFlags& rf, const PipelineConfig& cfg,
                     const LoadedRun& run, const PipelineResult& result, double wall_s,
                     const std::string& config_echo) {
  json j;
  j["version"] = LLP_VERSION;
  j["source_revision"] = LLP_GIT_REVISION;
  j["command"] = command;
  j["seed"] = rf.seed;
  j["dataset"] = {{"path", rf.data},
                  {"instances", run.ds.size()},
                  {"features", run.ds.dim()},
                  {"train", run.split.train_indices.size()},
                  {"validation", run.split.validation_indices.size()},
                  {"test", run.split.test_indices.size()}};
  j["bags"] = {{"bag_size", run.bags.bag_size}, {"num_bags", run.bags.num_bags()}};
  json cfg_json;
  cfg_json["iterations"] = cfg.iterations;
  cfg_json["standardize"] = rf.standardize;
  cfg_json["stages"] = json::array();
  for (std::size_t r = 0; r < cfg.iterations; ++r) cfg_json["stages"].push_back(stage_to_json(cfg.stage(r)));
  cfg_json["hidden_dims"] = cfg.mlp.hidden_dims;
  cfg_json["pool_hidden"] = cfg.mlp.pool_hidden;
  cfg_json["embedding_layer"] = cfg.mlp.embedding_layer;
  cfg_json["pooling"] = pooling_name(cfg.mlp.pooling);
  if (cfg.noise) {
    cfg_json["dp_epsilon"] = cfg.noise->epsilon;
    cfg_json["dp_delta"] = cfg.noise->delta;
    cfg_json["dp_rounded_counts"] = cfg.noise->rounded_counts;
    cfg_json["dp_tau_noise"] = gaussian_mechanism_tau(run.bags.bag_size, cfg.noise->epsilon,
                                                      cfg.noise->delta);
  }
  j["config"] = cfg_json;
  j["config_ini"] = config_echo;
  j["iterations"] = json::array();
  for (const auto& r : result.reports) j["iterations"].push_back(report_to_json(r));
  j["total_wall_s"] = wall_s;
  return j;
}

// ---- subcommand implementations ---------------------------------------------

int cmd_synth(const std::string& out, std::size_t m, std::size_t d, double separation,
              std::uint64_t seed) {
  const LabeledDataset ds = make_synthetic(m, d, separation, seed);
  save_csv(ds, out);
  std::cout << "wrote " << out << " (m=" << m << ", d=" << d << ")\n";
  return 0;
}

int cmd_bags(const std::string& data, const std::string& labels_col, std::size_t bag_size,
             std::uint64_t seed, const std::string& out_dir, double dp_epsilon, double dp_delta) {
  const LabeledDataset ds = load_csv(data, labels_col);
  if (!ds.labels) throw std::runtime_error("bags: dataset has no label column");
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  const BagStructure bs = generate_bags(all, bag_size, *ds.labels, seed);
  ensure_dir(out_dir);
  save_bags(bs, out_dir + "/bags.csv", out_dir + "/bag_counts.csv");
  std::cout << "wrote " << bs.num_bags() << " bags of size " << bag_size << " to " << out_dir
            << "\n";
  if (dp_epsilon > 0.0) {
    const NoisyBagLabels noisy = add_label_dp_noise(bs, dp_epsilon, dp_delta, mix_seed(seed, 0xd9));
    std::vector<std::vector<double>> rows;
    for (std::size_t b = 0; b < noisy.proportions.size(); ++b)
      rows.push_back({static_cast<double>(b), noisy.proportions[b]});
    csv::write_numeric(out_dir + "/noisy_proportions.csv", {"bag_id", "proportion"}, rows);
    std::cout << "wrote noisy proportions (tau=" << noisy.tau_noise << ")\n";
  }
  return 0;
}

struct BpInputFlags {
  std::string nodes, pairs;                    // model-file route
  std::string data, labels_col, bags, counts;  // data route
  GraphFlags graph;
  double lambda_b = 1.0;
  double lambda_s = 1.0;
  std::uint64_t seed = 0;
  std::string dump_graph;  // optional src,dst,distance,kernel_value export
  std::string dump_model;  // optional nodes/pairs export prefix
};

IsingModel assemble_model(const BpInputFlags& in, std::vector<int>* labels_out) {
  if (!in.nodes.empty()) {
    if (in.pairs.empty()) throw std::runtime_error("--nodes requires --pairs");
    return load_model_csv(in.nodes, in.pairs);
  }
  if (in.data.empty()) throw std::runtime_error("either --nodes/--pairs or --data is required");
  const LabeledDataset ds = load_csv(in.data, in.labels_col);
  if (labels_out && ds.labels) *labels_out = *ds.labels;
  if (in.bags.empty() || in.counts.empty())
    throw std::runtime_error("--data requires --bags and --counts");
  const BagStructure bs = load_bags(in.bags, in.counts);
  NeighborGraph graph = build_graph(ds.features, in.graph.k, in.graph.delta_d,
                                    parse_metric(in.graph.metric));
  if (in.graph.knn_fraction < 1.0)
    graph = subsample_constraints(graph, in.graph.knn_fraction, mix_seed(in.seed, 0x5b));
  if (!in.dump_graph.empty()) save_graph_csv(graph, in.graph.kernel_spec(), in.dump_graph);
  IsingModel model =
      build_ising(ds.features, bs, graph, in.graph.kernel_spec(), in.lambda_b, in.lambda_s);
  if (!in.dump_model.empty())
    save_model_csv(model, in.dump_model + "_nodes.csv", in.dump_model + "_pairs.csv");
  return model;
}

int cmd_bp(const BpInputFlags& in, const BpFlags& bp, const std::string& out_dir, bool stability,
           bool map_decode) {
  std::vector<int> labels;
  const IsingModel model = assemble_model(in, &labels);

  BpOptions opt;
  opt.max_rounds = bp.rounds;
  opt.damping = bp.damping;
  opt.tol = bp.tol;
  BpDiagnostics diag;
  const MarginalVector marginals = sum_product(model, opt, &diag);
  const PseudoLabelSet pseudo = threshold(marginals, bp.tau, parse_threshold_mode(bp.threshold_mode));

  ensure_dir(out_dir);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < marginals.probs.size(); ++i)
    rows.push_back({static_cast<double>(i), marginals.probs[i]});
  csv::write_numeric(out_dir + "/marginals.csv", {"instance_index", "p1"}, rows);
  save_pseudo_labels_csv(pseudo, out_dir + "/pseudo_labels.csv");

  json j;
  j["rounds_run"] = diag.rounds_run;
  j["converged"] = diag.converged;
  j["delta_trace"] = diag.message_deltas;
  const MooijResult mooij = mooij_contraction_check(model);
  j["mooij_value"] = mooij.value;
  j["mooij_holds"] = mooij.holds;
  if (stability && model.num_edges() > 0) {
    const StabilityResult stab = linearized_stability(model);
    j["spectral_norm"] = stab.spectral_norm;
    j["beta_threshold"] = json_number(stab.beta_threshold);
  } else {
    j["spectral_norm"] = nullptr;
    j["beta_threshold"] = nullptr;
  }
  if (!labels.empty() && labels.size() == marginals.probs.size())
    j["pseudo_label_auroc"] = pseudo_label_auroc(marginals, labels);
  write_json(j, out_dir + "/diagnostics.json");

  if (map_decode) {
    const std::vector<int> y = max_product(model, opt);
    std::vector<std::vector<double>> map_rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      map_rows.push_back({static_cast<double>(i), static_cast<double>(y[i])});
    csv::write_numeric(out_dir + "/map.csv", {"instance_index", "y"}, map_rows);
  }
  std::cout << "bp: " << diag.rounds_run << " rounds, converged=" << (diag.converged ? 1 : 0)
            << ", outputs in " << out_dir << "\n";
  return 0;
}

int cmd_stability(const BpInputFlags& in, std::size_t power_iters, const std::string& out) {
  const IsingModel model = assemble_model(in, nullptr);
  const MooijResult mooij = mooij_contraction_check(model);
  const StabilityResult stab = linearized_stability(model, power_iters);
  json j;
  j["mooij_value"] = mooij.value;
  j["mooij_holds"] = mooij.holds;
  j["spectral_norm"] = stab.spectral_norm;
  j["beta_threshold"] = json_number(stab.beta_threshold);
  j["power_iterations"] = stab.iterations;
  if (!out.empty()) write_json(j, out);
  std::cout << "spectral_norm=" << stab.spectral_norm << " beta_threshold="
            << (std::isinf(stab.beta_threshold) ? std::string("inf")
                                                : std::to_string(stab.beta_threshold))
            << " mooij=" << mooij.value << (mooij.holds ? " (holds)" : " (fails)") << "\n";
  return 0;
}

// Serializes the resolved run configuration in the same flat key=value
// format the --config option reads back.
std::string flat_config_echo(bool dllp, const RunFlags& rf, const GraphFlags& gf,
                             const BpFlags& bf, const TrainFlags& tf, std::size_t iterations,
                             bool stability, const std::vector<std::string>& overrides) {
  std::ostringstream out;
  out << "data=" << rf.data << "\n"
      << "labels-col=" << rf.labels_col << "\n"
      << "bag-size=" << rf.bag_size << "\n"
      << "seed=" << rf.seed << "\n"
      << "train-frac=" << rf.train_frac << "\n"
      << "val-frac=" << rf.val_frac << "\n"
      << "test-frac=" << rf.test_frac << "\n"
      << "standardize=" << (rf.standardize ? "true" : "false") << "\n";
  if (rf.dp_epsilon > 0.0)
    out << "dp-epsilon=" << rf.dp_epsilon << "\n"
        << "dp-delta=" << rf.dp_delta << "\n"
        << "dp-real-proportions=" << (rf.dp_real_proportions ? "true" : "false") << "\n";
  if (!dllp) {
    out << "iterations=" << iterations << "\n"
        << "k=" << gf.k << "\n"
        << "delta-d=" << gf.delta_d << "\n"
        << "metric=" << gf.metric << "\n"
        << "kernel=" << gf.kernel << "\n"
        << "gamma=" << gf.gamma << "\n"
        << "matern-nu=" << gf.matern_nu << "\n"
        << "length-scale=" << gf.length_scale << "\n"
        << "knn-fraction=" << gf.knn_fraction << "\n"
        << "lambda-b=" << bf.lambda_b << "\n"
        << "lambda-s=" << bf.lambda_s << "\n"
        << "T=" << bf.rounds << "\n"
        << "damping=" << bf.damping << "\n"
        << "tol=" << bf.tol << "\n"
        << "tau=" << bf.tau << "\n"
        << "threshold-mode=" << bf.threshold_mode << "\n"
        << "stability=" << (stability ? "true" : "false") << "\n";
    for (const auto& ov : overrides) out << "stage-override=" << ov << "\n";
    out << "lambda-a=" << tf.lambda_a << "\n";
  }
  out << "lr=" << tf.lr << "\n"
      << "weight-decay=" << tf.weight_decay << "\n"
      << "batch-size=" << tf.batch_size << "\n"
      << "max-epochs=" << tf.max_epochs << "\n"
      << "patience=" << tf.patience << "\n"
      << "pool-hidden=" << tf.pool_hidden << "\n"
      << "embedding-layer=" << tf.embedding_layer << "\n"
      << "pooling=" << tf.pooling << "\n";
  out << "hidden=";
  for (std::size_t i = 0; i < tf.hidden.size(); ++i) out << (i ? "," : "") << tf.hidden[i];
  out << "\n";
  return out.str();
}

int cmd_pipeline_or_dllp(bool dllp, const RunFlags& rf, const GraphFlags& gf, const BpFlags& bf,
                         const TrainFlags& tf, std::size_t iterations, bool stability,
                         const std::vector<std::string>& overrides) {
  const std::string config_echo =
      flat_config_echo(dllp, rf, gf, bf, tf, iterations, stability, overrides);
  set_max_threads(rf.threads);
  const auto wall0 = std::chrono::steady_clock::now();
  const LoadedRun run = load_run_inputs(rf);

  StageConfig base;
  base.k = gf.k;
  base.delta_d = gf.delta_d;
  base.metric = parse_metric(gf.metric);
  base.kernel = gf.kernel_spec();
  base.lambda_b = bf.lambda_b;
  base.lambda_s = bf.lambda_s;
  base.bp_rounds = bf.rounds;
  base.bp_damping = bf.damping;
  base.bp_tol = bf.tol;
  base.tau = bf.tau;
  base.threshold_mode = parse_threshold_mode(bf.threshold_mode);
  base.knn_constraint_fraction = gf.knn_fraction;
  base.train = tf.train_config();

  PipelineConfig cfg;
  cfg.iterations = iterations;
  cfg.stages.assign(iterations, base);
  apply_stage_overrides(cfg.stages, overrides);
  cfg.mlp = tf.mlp_config();
  cfg.seed = rf.seed;
  cfg.compute_stability = stability;
  cfg.out_dir = rf.out_dir;
  if (rf.dp_epsilon > 0.0)
    cfg.noise = DpNoiseConfig{rf.dp_epsilon, rf.dp_delta, !rf.dp_real_proportions};

  ensure_dir(rf.out_dir);
  const PipelineResult result = dllp ? run_dllp(run.ds, run.split, run.bags, cfg)
                                     : run_pipeline(run.ds, run.split, run.bags, cfg);

  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  save_metrics_csv(result.reports, rf.out_dir + "/metrics.csv");
  write_json(run_to_manifest(dllp ? "dllp" : "pipeline", rf, cfg, run, result, wall_s,
                             config_echo),
             rf.out_dir + "/manifest.json");
  {
    std::ofstream ini(rf.out_dir + "/config_echo.ini");
    ini << config_echo;
  }

  for (const auto& rep : result.reports)
    std::cout << "iter " << rep.iteration << ": pseudo_auroc="
              << (std::isnan(rep.pseudo_label_auroc) ? -1.0 : rep.pseudo_label_auroc)
              << " val_auroc=" << rep.val_auroc << " test_auroc=" << rep.test_auroc << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& labels_col, const std::string& model_path,
             const std::string& scores_path, const std::string& out_scores, std::size_t knn_k,
             const std::string& metric, double delta_d) {
  const LabeledDataset ds = load_csv(data, labels_col);
  if (!ds.labels) throw std::runtime_error("eval: dataset has no label column");

  std::vector<double> scores;
  if (!model_path.empty()) {
    const MlpModel model = load_mlp_json(model_path);
    scores = score_rows(model, ds.features);
  } else if (!scores_path.empty()) {
    const csv::Table t = csv::read_numeric(scores_path);
    const std::size_t ic = t.col_index("instance_index");
    const std::size_t sc = t.has_column("score") ? t.col_index("score") : t.col_index("p1");
    scores.assign(ds.size(), 0.0);
    for (const auto& row : t.rows) {
      const auto i = static_cast<std::size_t>(row[ic]);
      if (i >= scores.size()) throw std::runtime_error("eval: score index out of range");
      scores[i] = row[sc];
    }
  } else {
    throw std::runtime_error("eval: pass --model or --scores");
  }

  std::cout << "auroc=" << auroc(scores, *ds.labels) << "\n";
  if (knn_k > 0) {
    const NeighborGraph g = build_graph(ds.features, knn_k, delta_d, parse_metric(metric));
    std::cout << "knn_score=" << knn_label_score(g, *ds.labels) << "\n";
  }
  if (!out_scores.empty()) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < scores.size(); ++i)
      rows.push_back({static_cast<double>(i), scores[i]});
    csv::write_numeric(out_scores, {"instance_index", "score"}, rows);
  }
  return 0;
}

}  // namespace

namespace {

// Flat key=value config support: file values become trailing CLI arguments
// for any key the command line did not already set, so flags override the
// file. Lines starting with '#' are comments; boolean keys accept
// true/false/1/0.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    items.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return items;
}

std::vector<std::string> inject_config_args(const std::vector<std::string>& args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::vector<std::string> out = args;
  for (const auto& [key, value] : read_flat_config(config_path)) {
    const std::string flag = "--" + key;
    bool already_set = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        already_set = true;
        break;
      }
    if (already_set) continue;
    out.push_back(flag + "=" + value);  // flags accept --name=true/false too
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Learning from label proportions via belief propagation"};
  app.set_version_flag("--version", std::string(LLP_VERSION) + " (" + LLP_GIT_REVISION + ")");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a two-Gaussian synthetic dataset");
  struct {
    std::string out = "synthetic.csv";
    std::size_t m = 4000, d = 2;
    double separation = 6.0;
    std::uint64_t seed = 0;
  } sy;
  synth->add_option("--out", sy.out, "output CSV path");
  synth->add_option("--m", sy.m, "instances")->check(CLI::Range(2, 1 << 26));
  synth->add_option("--d", sy.d, "feature dimensions")->check(CLI::PositiveNumber);
  synth->add_option("--separation", sy.separation, "class-mean separation")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sy.seed, "seed");

  // bags
  auto* bags = app.add_subcommand("bags", "draw disjoint random bags and write counts");
  struct {
    std::string data, labels_col = "label", out_dir = "out";
    std::size_t bag_size = 32;
    std::uint64_t seed = 0;
    double dp_epsilon = 0.0, dp_delta = 1e-5;
  } bg;
  bags->add_option("--data", bg.data)->required();
  bags->add_option("--labels-col", bg.labels_col);
  bags->add_option("--bag-size", bg.bag_size)->check(CLI::Range(2, 1 << 20));
  bags->add_option("--seed", bg.seed);
  bags->add_option("--out-dir", bg.out_dir);
  bags->add_option("--dp-epsilon", bg.dp_epsilon, "also emit noisy proportions");
  bags->add_option("--dp-delta", bg.dp_delta);

  // bp
  auto* bp = app.add_subcommand("bp", "run sum-product BP and dump marginals");
  BpInputFlags bpin;
  BpFlags bpf;
  std::string bp_out = "out";
  bool bp_stability = false, bp_map = false;
  int bp_threads = 0;
  bp->add_option("--nodes", bpin.nodes, "node potentials CSV (index,h)");
  bp->add_option("--pairs", bpin.pairs, "pairwise potentials CSV (i,j,coupling)");
  bp->add_option("--data", bpin.data, "feature CSV (alternative to --nodes/--pairs)");
  bp->add_option("--labels-col", bpin.labels_col);
  bp->add_option("--bags", bpin.bags, "bag assignment CSV (instance_index,bag_id)");
  bp->add_option("--counts", bpin.counts, "bag counts CSV (bag_id,count)");
  bpin.graph.add_to(bp);
  bp->add_option("--lambda-b", bpin.lambda_b)->check(CLI::NonNegativeNumber);
  bp->add_option("--lambda-s", bpin.lambda_s)->check(CLI::NonNegativeNumber);
  bp->add_option("--seed", bpin.seed);
  bp->add_option("--T,--rounds", bpf.rounds)->check(CLI::PositiveNumber);
  bp->add_option("--damping", bpf.damping)->check(CLI::Range(0.0, 1.0));
  bp->add_option("--tol", bpf.tol);
  bp->add_option("--tau", bpf.tau);
  bp->add_option("--threshold-mode", bpf.threshold_mode)
      ->check(CLI::IsMember({"hard", "soft", "soft_weighted"}));
  bp->add_option("--out-dir", bp_out);
  bp->add_flag("--stability", bp_stability, "include the linearized-BP spectral norm");
  bp->add_flag("--map", bp_map, "also write the max-product decoding");
  bp->add_option("--dump-graph", bpin.dump_graph,
                 "write the neighbor graph (src,dst,distance,kernel_value) here");
  bp->add_option("--dump-model", bpin.dump_model,
                 "write the assembled potentials to PREFIX_nodes.csv / PREFIX_pairs.csv");
  bp->add_option("--threads", bp_threads);

  // stability
  auto* stab = app.add_subcommand("stability", "convergence diagnostics for a model");
  BpInputFlags stin;
  std::size_t st_power_iters = 500;
  std::string st_out;
  int st_threads = 0;
  stab->add_option("--nodes", stin.nodes);
  stab->add_option("--pairs", stin.pairs);
  stab->add_option("--data", stin.data);
  stab->add_option("--labels-col", stin.labels_col);
  stab->add_option("--bags", stin.bags);
  stab->add_option("--counts", stin.counts);
  stin.graph.add_to(stab);
  stab->add_option("--lambda-b", stin.lambda_b)->check(CLI::NonNegativeNumber);
  stab->add_option("--lambda-s", stin.lambda_s)->check(CLI::NonNegativeNumber);
  stab->add_option("--seed", stin.seed);
  stab->add_option("--power-iters", st_power_iters)->check(CLI::PositiveNumber);
  stab->add_option("--out", st_out, "optional JSON output path");
  stab->add_option("--threads", st_threads);

  // pipeline / dllp
  auto* pipe = app.add_subcommand("pipeline", "run the full iterative LLP pipeline");
  RunFlags prf;
  GraphFlags pgf;
  BpFlags pbf;
  TrainFlags ptf;
  std::size_t p_iterations = 2;
  bool p_stability = false;
  std::vector<std::string> p_overrides;
  prf.add_to(pipe);
  pgf.add_to(pipe);
  pbf.add_to(pipe);
  ptf.add_to(pipe);
  pipe->add_option("--iterations", p_iterations, "refinement iterations R")
      ->check(CLI::PositiveNumber);
  pipe->add_flag("--stability", p_stability, "compute the linearized-BP spectral norm per iteration");
  pipe->add_option("--stage-override", p_overrides,
                   "per-iteration override ITER:KEY=VALUE (repeatable)");
  std::string p_config;
  pipe->add_option("--config", p_config, "flat key=value config file; flags override file values");

  auto* dllp = app.add_subcommand("dllp", "train the DLLP baseline (bag-mean proportion fit)");
  RunFlags drf;
  TrainFlags dtf;
  drf.add_to(dllp);
  dtf.add_to(dllp);
  std::string d_config;
  dllp->add_option("--config", d_config, "flat key=value config file; flags override file values");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a score file");
  struct {
    std::string data, labels_col = "label", model, scores, out_scores, metric = "cosine";
    std::size_t knn_k = 0;
    double delta_d = std::numeric_limits<double>::infinity();
  } ev;
  eval->add_option("--data", ev.data)->required();
  eval->add_option("--labels-col", ev.labels_col);
  eval->add_option("--model", ev.model, "MLP checkpoint JSON");
  eval->add_option("--scores", ev.scores, "score CSV (instance_index,score|p1)");
  eval->add_option("--out-scores", ev.out_scores, "write computed scores here");
  eval->add_option("--knn-k", ev.knn_k, "also report the kNN label score with this k");
  eval->add_option("--metric", ev.metric)->check(CLI::IsMember({"cosine", "euclidean"}));
  eval->add_option("--delta-d", ev.delta_d);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_config_args(args);
    std::vector<const char*> cargs{argv[0]};
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(sy.out, sy.m, sy.d, sy.separation, sy.seed);
    if (bags->parsed())
      return cmd_bags(bg.data, bg.labels_col, bg.bag_size, bg.seed, bg.out_dir, bg.dp_epsilon,
                      bg.dp_delta);
    if (bp->parsed()) {
      set_max_threads(bp_threads);
      return cmd_bp(bpin, bpf, bp_out, bp_stability, bp_map);
    }
    if (stab->parsed()) {
      set_max_threads(st_threads);
      return cmd_stability(stin, st_power_iters, st_out);
    }
    if (pipe->parsed())
      return cmd_pipeline_or_dllp(false, prf, pgf, pbf, ptf, p_iterations, p_stability,
                                  p_overrides);
    if (dllp->parsed())
      return cmd_pipeline_or_dllp(true, drf, GraphFlags{}, BpFlags{}, dtf, 1, false, {});
    if (eval->parsed())
      return cmd_eval(ev.data, ev.labels_col, ev.model, ev.scores, ev.out_scores, ev.knn_k,
                      ev.metric, ev.delta_d);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace llp
