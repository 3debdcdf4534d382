#include "slubench/nn/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slubench/errors.hpp"

namespace slubench::nn {

namespace {

void check_shapes(const Matrix& e, const Matrix& t) {
  if (e.rows == 0 || e.cols == 0) throw ContractError("crf: empty emissions " + shape_string(e));
  if (t.rows != e.cols || t.cols != e.cols)
    throw ContractError("crf: transitions " + shape_string(t) + " do not match emissions " + shape_string(e));
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = *std::max_element(v, v + n);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// alpha(t, k) = log sum over prefixes ending in k at t.
Matrix forward_table(const Matrix& e, const Matrix& tr) {
  const std::size_t len = e.rows, k = e.cols;
  Matrix alpha(len, k);
  for (std::size_t j = 0; j < k; ++j) alpha(0, j) = e(0, j);
  std::vector<double> buf(k);
  for (std::size_t t = 1; t < len; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) buf[i] = alpha(t - 1, i) + tr(i, j);
      alpha(t, j) = log_sum_exp(buf.data(), k) + e(t, j);
    }
  return alpha;
}

Matrix backward_table(const Matrix& e, const Matrix& tr) {
  const std::size_t len = e.rows, k = e.cols;
  Matrix beta(len, k);
  std::vector<double> buf(k);
  for (std::size_t t = len - 1; t-- > 0;)
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) buf[j] = tr(i, j) + e(t + 1, j) + beta(t + 1, j);
      beta(t, i) = log_sum_exp(buf.data(), k);
    }
  return beta;
}

}  // namespace

double crf_sequence_score(const Matrix& e, const Matrix& tr, const std::vector<std::size_t>& labels) {
  check_shapes(e, tr);
  if (labels.size() != e.rows)
    throw ContractError("crf: " + std::to_string(labels.size()) + " labels for " + std::to_string(e.rows) +
                        " positions");
  double s = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] >= e.cols)
      throw ContractError("crf: label " + std::to_string(labels[t]) + " out of range [0," +
                          std::to_string(e.cols) + ")");
    s += e(t, labels[t]);
    if (t > 0) s += tr(labels[t - 1], labels[t]);
  }
  return s;
}

double crf_forward(const Matrix& e, const Matrix& tr) {
  check_shapes(e, tr);
  Matrix alpha = forward_table(e, tr);
  return log_sum_exp(&alpha(e.rows - 1, 0), e.cols);
}

ViterbiResult crf_viterbi(const Matrix& e, const Matrix& tr) {
  check_shapes(e, tr);
  const std::size_t len = e.rows, k = e.cols;
  Matrix delta(len, k);
  std::vector<std::size_t> back(len * k, 0);
  for (std::size_t j = 0; j < k; ++j) delta(0, j) = e(0, j);
  for (std::size_t t = 1; t < len; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t best = 0;
      double bv = delta(t - 1, 0) + tr(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        double v = delta(t - 1, i) + tr(i, j);
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      delta(t, j) = bv + e(t, j);
      back[t * k + j] = best;
    }
  ViterbiResult out;
  out.labels.assign(len, 0);
  std::size_t last = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (delta(len - 1, j) > delta(len - 1, last)) last = j;
  out.score = delta(len - 1, last);
  out.labels[len - 1] = last;
  for (std::size_t t = len - 1; t > 0; --t) out.labels[t - 1] = back[t * k + out.labels[t]];
  return out;
}

CrfMarginals crf_marginals(const Matrix& e, const Matrix& tr) {
  check_shapes(e, tr);
  const std::size_t len = e.rows, k = e.cols;
  Matrix alpha = forward_table(e, tr);
  Matrix beta = backward_table(e, tr);
  CrfMarginals m;
  m.log_z = log_sum_exp(&alpha(len - 1, 0), k);
  m.unary = Matrix(len, k);
  m.pairwise = Matrix(k, k);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < k; ++j) m.unary(t, j) = std::exp(alpha(t, j) + beta(t, j) - m.log_z);
  for (std::size_t t = 1; t < len; ++t)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        m.pairwise(i, j) += std::exp(alpha(t - 1, i) + tr(i, j) + e(t, j) + beta(t, j) - m.log_z);
  return m;
}

Tensor crf_nll(Tensor emissions, Tensor transitions, const std::vector<std::size_t>& gold) {
  if (!emissions.valid() || emissions.graph() != transitions.graph())
    throw ContractError("crf_nll: tensors from different graphs");
  Graph& g = *emissions.graph();
  const Matrix& e = emissions.value();
  const Matrix& tr = transitions.value();
  double gold_score = crf_sequence_score(e, tr, gold);
  CrfMarginals m = crf_marginals(e, tr);
  double loss = std::max(0.0, m.log_z - gold_score);
  std::size_t ei = emissions.id(), ti = transitions.id();
  return g.record(Matrix(1, 1, {loss}), {ei, ti},
                  [ei, ti, gold, m = std::move(m)](Graph& g, std::size_t self) {
                    double up = g.grad_mut(self).data[0];
                    if (g.needs_grad(ei)) {
                      Matrix& de = g.grad_mut(ei);
                      for (std::size_t i = 0; i < de.size(); ++i) de.data[i] += up * m.unary.data[i];
                      for (std::size_t t = 0; t < gold.size(); ++t) de(t, gold[t]) -= up;
                    }
                    if (g.needs_grad(ti)) {
                      Matrix& dt = g.grad_mut(ti);
                      for (std::size_t i = 0; i < dt.size(); ++i) dt.data[i] += up * m.pairwise.data[i];
                      for (std::size_t t = 1; t < gold.size(); ++t) dt(gold[t - 1], gold[t]) -= up;
                    }
                  });
}

}  // namespace slubench::nn
