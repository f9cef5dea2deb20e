// Compares the OpenMP kernels against their serial reference
// implementations: brute-force kNN search, BP message rounds, and the dense
// matrix products behind the MLP.
#include <chrono>
#include <cstdio>
#include <random>

#include "llp/bp_engine.hpp"
#include "llp/dataset.hpp"
#include "llp/gibbs_model.hpp"
#include "llp/kernels.hpp"
#include "llp/knn_graph.hpp"
#include "llp/parallel.hpp"

using namespace llp;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_s(F&& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-22s serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", name, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t m = 4000;
  if (argc > 1) m = std::strtoull(argv[1], nullptr, 10);
  std::printf("threads: %d, m: %zu\n", max_threads(), m);

  const LabeledDataset ds = make_synthetic(m, 8, 4.0, 7);

  // kNN construction
  NeighborGraph graph;
  const double knn_serial = time_s([&] {
    graph = build_graph_serial(ds.features, 5, std::numeric_limits<double>::infinity(),
                               DistanceMetric::Euclidean);
  });
  const double knn_omp = time_s([&] {
    graph = build_graph(ds.features, 5, std::numeric_limits<double>::infinity(),
                        DistanceMetric::Euclidean);
  });
  report("knn build", knn_serial, knn_omp);

  // BP rounds on a bagged Ising model. The direct-exclusion reference does
  // O(deg^2) work per node, so it is timed separately from the 1-thread vs
  // N-thread comparison of the production engine.
  std::vector<std::size_t> all(m);
  for (std::size_t i = 0; i < m; ++i) all[i] = i;
  const BagStructure bags = generate_bags(all, 32, *ds.labels, 7);
  const IsingModel model = build_ising(ds.features, bags, graph, KernelSpec{}, 0.3, 1.0);
  BpOptions opt;
  opt.max_rounds = 30;
  opt.tol = 0.0;
  const int threads = max_threads();
  set_max_threads(1);
  const double bp_one = time_s([&] { sum_product(model, opt); });
  set_max_threads(threads);
  const double bp_omp = time_s([&] { sum_product(model, opt); });
  std::printf("%-22s 1 thr  %8.3f ms   omp %8.3f ms   speedup %.2fx\n", "bp 30 rounds",
              bp_one * 1e3, bp_omp * 1e3, bp_one / bp_omp);
  const double bp_ref = time_s([&] { sum_product_serial(model, opt); }, 1);
  std::printf("%-22s reference (direct exclusion) %8.3f ms\n", "", bp_ref * 1e3);

  // Dense kernels at MLP batch scale
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix a(1024, 256), b(512, 256), c;
  for (auto& v : a.data) v = unif(rng);
  for (auto& v : b.data) v = unif(rng);
  const double mm_serial = time_s([&] { matmul_abt_serial(a, b, c); });
  const double mm_omp = time_s([&] { matmul_abt(a, b, c); });
  report("matmul 1024x256x512", mm_serial, mm_omp);

  return 0;
}
