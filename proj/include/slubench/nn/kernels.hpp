#pragma once

#include "slubench/nn/matrix.hpp"

// Dense kernels behind the graph ops. Each parallel kernel has a serial
// reference with the same per-element summation order, so results are
// bit-identical for any thread count.
namespace slubench::nn::kernels {

// C = op(A) * op(B), or C += ... when accumulate is set. op transposes
// when the matching flag is set. C must already have the result shape.
void gemm_serial(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c,
                 bool accumulate);
void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c, bool accumulate);

// Work (rows * cols * inner) above which gemm forks threads.
inline constexpr std::size_t kParallelGemmWork = 1u << 16;

// y += alpha * x over equally sized buffers.
void axpy(double alpha, const Matrix& x, Matrix& y);

}  // namespace slubench::nn::kernels
