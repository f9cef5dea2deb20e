#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace llp {

// Dense row-major matrix of doubles. Shared by feature storage and the MLP.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool all_finite() const;
};

using FeatureMatrix = Matrix;

// Features plus optional {0,1} labels. Labels are used only for evaluation
// and for computing bag counts; they are never handed to the learner at the
// instance level.
struct LabeledDataset {
  FeatureMatrix features;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

struct DataSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

// Loads a numeric CSV with header row. If label_column is non-empty that
// column becomes the {0,1} label vector and the remaining columns, in file
// order, become features. Throws on parse failure, non-binary labels, or
// ragged rows.
LabeledDataset load_csv(const std::string& path, const std::string& label_column = "");

// Writes features (f1..fd or given names) plus an optional label column.
void save_csv(const LabeledDataset& ds, const std::string& path,
              const std::string& label_column = "label");

// Two Gaussian blobs in d dimensions: half the points at the origin with
// label 0, half at (separation, 0, ..., 0) with label 1. Deterministic in
// seed.
LabeledDataset make_synthetic(std::size_t m, std::size_t d, double separation, std::uint64_t seed);

// Random disjoint partition into train/validation/test. Fractions must be
// positive and sum to 1 within 1e-9.
DataSplit split(const LabeledDataset& ds, double train_frac, double val_frac, double test_frac,
                std::uint64_t seed);

// In-place per-column standardization to zero mean / unit variance
// (constant columns are left centered).
void standardize_columns(Matrix& features);

// Gathers the given rows into a new matrix.
Matrix gather_rows(const Matrix& features, std::span<const std::size_t> indices);

}  // namespace llp
