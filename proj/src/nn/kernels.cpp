#include "slubench/nn/kernels.hpp"

#include <cstdio>
#include <stdexcept>

#include "slubench/errors.hpp"

namespace slubench::nn {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ContractError("Matrix: value count does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) {
  for (auto& x : data) x = v;
}

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + "]";
}

namespace kernels {

namespace {

struct Dims {
  std::size_t m, n, k;
};

Dims check(const Matrix& a, bool ta, const Matrix& b, bool tb, const Matrix& c) {
  std::size_t m = ta ? a.cols : a.rows, ka = ta ? a.rows : a.cols;
  std::size_t kb = tb ? b.cols : b.rows, n = tb ? b.rows : b.cols;
  if (ka != kb || c.rows != m || c.cols != n)
    throw ContractError("gemm: incompatible shapes " + shape_string(a) + (ta ? "^T" : "") + " * " +
                        shape_string(b) + (tb ? "^T" : "") + " -> " + shape_string(c));
  return {m, n, ka};
}

// One output row; the k loop order is fixed so serial and parallel agree.
inline void gemm_row(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& c, bool acc,
                     std::size_t i, const Dims& d) {
  double* out = c.data.data() + i * d.n;
  if (!acc)
    for (std::size_t j = 0; j < d.n; ++j) out[j] = 0.0;
  for (std::size_t p = 0; p < d.k; ++p) {
    double av = ta ? a(p, i) : a(i, p);
    if (av == 0.0) continue;
    if (!tb) {
      const double* brow = b.data.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) out[j] += av * brow[j];
    } else {
      for (std::size_t j = 0; j < d.n; ++j) out[j] += av * b(j, p);
    }
  }
}

}  // namespace

void gemm_serial(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& c, bool acc) {
  Dims d = check(a, ta, b, tb, c);
  for (std::size_t i = 0; i < d.m; ++i) gemm_row(a, ta, b, tb, c, acc, i, d);
}

void gemm(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& c, bool acc) {
  Dims d = check(a, ta, b, tb, c);
  const auto m = static_cast<std::ptrdiff_t>(d.m);
  const bool fork = d.m * d.n * d.k >= kParallelGemmWork && d.m > 1;
#pragma omp parallel for schedule(static) if (fork)
  for (std::ptrdiff_t i = 0; i < m; ++i) gemm_row(a, ta, b, tb, c, acc, static_cast<std::size_t>(i), d);
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (x.size() != y.size()) throw ContractError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

}  // namespace kernels
}  // namespace slubench::nn
