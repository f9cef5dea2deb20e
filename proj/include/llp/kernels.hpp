#pragma once

#include "llp/dataset.hpp"

namespace llp {

// Dense kernels used by the MLP. Parallel versions split work over rows of
// the output; every output element is produced by exactly one thread with a
// fixed-order inner loop, so results are bit-identical for any thread count.
// The *_serial twins are the reference implementations used in tests and the
// benchmark.

// C = A * B     (A: n x k, B: k x m, C: n x m)
void matmul_ab(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_ab_serial(const Matrix& a, const Matrix& b, Matrix& c);

// C = A * B^T   (A: n x k, B: m x k, C: n x m)
void matmul_abt(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_abt_serial(const Matrix& a, const Matrix& b, Matrix& c);

// C = A^T * B   (A: k x n, B: k x m, C: n x m)
void matmul_atb(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_atb_serial(const Matrix& a, const Matrix& b, Matrix& c);

}  // namespace llp
