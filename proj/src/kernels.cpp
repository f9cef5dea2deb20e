#include "llp/kernels.hpp"

#include <stdexcept>

namespace llp {

namespace {

void check_abt(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_abt: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.rows) c = Matrix(a.rows, b.rows);
}

void check_atb(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_atb: inner dimensions differ");
  if (c.rows != a.cols || c.cols != b.cols) c = Matrix(a.cols, b.cols);
}

void check_ab(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul_ab: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.cols) c = Matrix(a.rows, b.cols);
}

}  // namespace

void matmul_ab_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_ab(a, b, c);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols; ++t) s += a.data[i * a.cols + t] * b.data[t * b.cols + j];
      ci[j] = s;
    }
  }
}

void matmul_ab(const Matrix& a, const Matrix& b, Matrix& c) {
  check_ab(a, b, c);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(a.rows); ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols; ++t) s += a.data[i * a.cols + t] * b.data[t * b.cols + j];
      ci[j] = s;
    }
  }
}

void matmul_abt_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_abt(a, b, c);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * b.cols;
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols; ++t) s += ai[t] * bj[t];
      ci[j] = s;
    }
  }
}

void matmul_abt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_abt(a, b, c);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(a.rows); ++i) {
    const double* ai = a.data.data() + i * a.cols;
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * b.cols;
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols; ++t) s += ai[t] * bj[t];
      ci[j] = s;
    }
  }
}

void matmul_atb_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_atb(a, b, c);
  for (std::size_t i = 0; i < a.cols; ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.rows; ++t) s += a.data[t * a.cols + i] * b.data[t * b.cols + j];
      ci[j] = s;
    }
  }
}

void matmul_atb(const Matrix& a, const Matrix& b, Matrix& c) {
  check_atb(a, b, c);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(a.cols); ++i) {
    double* ci = c.data.data() + i * c.cols;
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.rows; ++t) s += a.data[t * a.cols + i] * b.data[t * b.cols + j];
      ci[j] = s;
    }
  }
}

}  // namespace llp
