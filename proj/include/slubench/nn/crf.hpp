#pragma once

#include <vector>

#include "slubench/nn/graph.hpp"

// Linear-chain CRF over emissions E (L x K) and transitions T (K x K):
//   score(y) = sum_t E[t, y_t] + sum_{t>0} T[y_{t-1}, y_t].
namespace slubench::nn {

double crf_sequence_score(const Matrix& emissions, const Matrix& transitions, const std::vector<std::size_t>& labels);

// log Z by log-sum-exp recursion.
double crf_forward(const Matrix& emissions, const Matrix& transitions);

struct ViterbiResult {
  std::vector<std::size_t> labels;
  double score = 0.0;
};

// Max-scoring sequence; ties go to the smallest label index.
ViterbiResult crf_viterbi(const Matrix& emissions, const Matrix& transitions);

struct CrfMarginals {
  Matrix unary;                 // L x K, P(y_t = k)
  Matrix pairwise;              // K x K, sum_t P(y_{t-1} = i, y_t = j)
  double log_z = 0.0;
};
CrfMarginals crf_marginals(const Matrix& emissions, const Matrix& transitions);

// logZ - score(gold) as a 1x1 graph node, differentiable in both inputs.
Tensor crf_nll(Tensor emissions, Tensor transitions, const std::vector<std::size_t>& gold);

}  // namespace slubench::nn
