#include "llp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "llp/csv.hpp"
#include "llp/rng.hpp"

namespace llp {

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
  csv::Table t = csv::read_numeric(path);
  LabeledDataset ds;

  std::size_t label_col = t.num_cols();  // sentinel: no label column
  if (!label_column.empty()) label_col = t.col_index(label_column);

  const std::size_t d = t.num_cols() - (label_col < t.num_cols() ? 1 : 0);
  if (d == 0) throw std::runtime_error("load_csv: no feature columns in '" + path + "'");
  if (t.num_rows() == 0) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

  ds.features = Matrix(t.num_rows(), d);
  std::vector<int> labels;
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    std::size_t f = 0;
    for (std::size_t c = 0; c < t.num_cols(); ++c) {
      const double v = t.rows[i][c];
      if (c == label_col) {
        if (v != 0.0 && v != 1.0)
          throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(i + 2) +
                                   ": label value " + csv::format_double(v) +
                                   " is not in {0,1}");
        labels.push_back(static_cast<int>(v));
      } else {
        if (!std::isfinite(v))
          throw std::runtime_error("load_csv: " + path + ": row " + std::to_string(i + 2) +
                                   ", column '" + t.columns[c] + "': non-finite value");
        ds.features.at(i, f++) = v;
      }
    }
  }
  if (label_col < t.num_cols()) ds.labels = std::move(labels);
  return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path, const std::string& label_column) {
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < ds.features.cols; ++j) cols.push_back("f" + std::to_string(j + 1));
  if (ds.labels) cols.push_back(label_column);

  std::vector<std::vector<double>> rows(ds.features.rows);
  for (std::size_t i = 0; i < ds.features.rows; ++i) {
    auto r = ds.features.row(i);
    rows[i].assign(r.begin(), r.end());
    if (ds.labels) rows[i].push_back(static_cast<double>((*ds.labels)[i]));
  }
  csv::write_numeric(path, cols, rows);
}

LabeledDataset make_synthetic(std::size_t m, std::size_t d, double separation,
                              std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("make_synthetic: m must be >= 2");
  if (d < 1) throw std::invalid_argument("make_synthetic: d must be >= 1");
  if (!(separation >= 0.0)) throw std::invalid_argument("make_synthetic: separation must be >= 0");

  const std::size_t n1 = m / 2;
  const std::size_t n0 = m - n1;

  LabeledDataset ds;
  ds.features = Matrix(m, d);
  std::vector<int> labels(m, 0);

  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const int label = i < n0 ? 0 : 1;
    labels[i] = label;
    for (std::size_t j = 0; j < d; ++j) {
      double v = gauss(rng);
      if (label == 1 && j == 0) v += separation;
      ds.features.at(i, j) = v;
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

DataSplit split(const LabeledDataset& ds, double train_frac, double val_frac, double test_frac,
                std::uint64_t seed) {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0))
    throw std::invalid_argument("split: fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");

  const std::size_t m = ds.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(m)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(m)));
  if (n_train + n_val > m) throw std::invalid_argument("split: fractions leave no test data");

  DataSplit s;
  s.train_indices.assign(idx.begin(), idx.begin() + n_train);
  s.validation_indices.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test_indices.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

void standardize_columns(Matrix& features) {
  for (std::size_t j = 0; j < features.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < features.rows; ++i) mean += features.at(i, j);
    mean /= static_cast<double>(features.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < features.rows; ++i) {
      const double c = features.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(features.rows);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < features.rows; ++i) {
      features.at(i, j) -= mean;
      if (sd > 0.0) features.at(i, j) /= sd;
    }
  }
}

Matrix gather_rows(const Matrix& features, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), features.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace llp
