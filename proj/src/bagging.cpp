#include "llp/bagging.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/rng.hpp"

namespace llp {

std::size_t BagStructure::num_bagged_instances() const {
  std::size_t n = 0;
  for (const auto& b : bags) n += b.size();
  return n;
}

BagStructure generate_bags(const std::vector<std::size_t>& train_indices, std::size_t bag_size,
                           const std::vector<int>& labels, std::uint64_t seed) {
  if (bag_size < 2) throw std::invalid_argument("generate_bags: bag size must be >= 2");
  if (train_indices.size() < bag_size)
    throw std::invalid_argument("generate_bags: bag size exceeds the training set");

  std::vector<std::size_t> order = train_indices;
  auto rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  BagStructure bs;
  bs.bag_size = bag_size;
  const std::size_t n_bags = order.size() / bag_size;
  bs.bags.reserve(n_bags);
  bs.counts.reserve(n_bags);
  for (std::size_t b = 0; b < n_bags; ++b) {
    std::vector<std::size_t> bag(order.begin() + b * bag_size, order.begin() + (b + 1) * bag_size);
    int count = 0;
    for (std::size_t idx : bag) {
      if (idx >= labels.size()) throw std::out_of_range("generate_bags: index outside label vector");
      count += labels[idx];
    }
    bs.bags.push_back(std::move(bag));
    bs.counts.push_back(count);
  }
  return bs;
}

double gaussian_mechanism_tau(std::size_t bag_size, double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("dp noise: epsilon must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("dp noise: delta must be in (0,1)");
  const double sensitivity = 1.0 / static_cast<double>(bag_size);
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

NoisyBagLabels add_label_dp_noise(const BagStructure& bs, double epsilon, double delta,
                                  std::uint64_t seed) {
  NoisyBagLabels out;
  out.epsilon = epsilon;
  out.delta = delta;
  out.tau_noise = gaussian_mechanism_tau(bs.bag_size, epsilon, delta);

  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, out.tau_noise);
  out.proportions.resize(bs.num_bags());
  const double B = static_cast<double>(bs.bag_size);
  for (std::size_t i = 0; i < bs.num_bags(); ++i) {
    const double p = static_cast<double>(bs.counts[i]) / B + noise(rng);
    out.proportions[i] = std::clamp(p, 0.0, 1.0);
  }
  return out;
}

int rounded_count(double proportion, std::size_t bag_size) {
  const long c = std::lround(proportion * static_cast<double>(bag_size));
  return static_cast<int>(std::clamp(c, 0L, static_cast<long>(bag_size)));
}

void save_bags(const BagStructure& bs, const std::string& assignments_path,
               const std::string& counts_path) {
  std::vector<std::vector<double>> assign;
  for (std::size_t b = 0; b < bs.num_bags(); ++b)
    for (std::size_t idx : bs.bags[b])
      assign.push_back({static_cast<double>(idx), static_cast<double>(b)});
  csv::write_numeric(assignments_path, {"instance_index", "bag_id"}, assign);

  std::vector<std::vector<double>> counts;
  for (std::size_t b = 0; b < bs.num_bags(); ++b)
    counts.push_back({static_cast<double>(b), static_cast<double>(bs.counts[b])});
  csv::write_numeric(counts_path, {"bag_id", "count"}, counts);
}

BagStructure load_bags(const std::string& assignments_path, const std::string& counts_path) {
  csv::Table assign = csv::read_numeric(assignments_path);
  csv::Table counts = csv::read_numeric(counts_path);
  const std::size_t idx_col = assign.col_index("instance_index");
  const std::size_t bag_col = assign.col_index("bag_id");
  const std::size_t cid_col = counts.col_index("bag_id");
  const std::size_t cnt_col = counts.col_index("count");

  BagStructure bs;
  bs.bags.resize(counts.num_rows());
  bs.counts.resize(counts.num_rows());
  for (const auto& row : counts.rows) {
    const auto b = static_cast<std::size_t>(row[cid_col]);
    if (b >= bs.counts.size()) throw std::runtime_error("load_bags: bag_id out of range");
    bs.counts[b] = static_cast<int>(row[cnt_col]);
  }
  for (const auto& row : assign.rows) {
    const auto b = static_cast<std::size_t>(row[bag_col]);
    if (b >= bs.bags.size()) throw std::runtime_error("load_bags: bag_id out of range");
    bs.bags[b].push_back(static_cast<std::size_t>(row[idx_col]));
  }
  for (const auto& bag : bs.bags) {
    if (bag.empty()) throw std::runtime_error("load_bags: empty bag");
    if (!bs.bag_size) bs.bag_size = bag.size();
  }
  return bs;
}

}  // namespace llp
