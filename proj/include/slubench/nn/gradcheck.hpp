#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "slubench/nn/graph.hpp"

namespace slubench::nn {

// Builds a scalar loss on a fresh graph from the current parameter values.
using LossFn = std::function<Tensor(Graph&, const ParamStore&)>;
// Hook to alter analytic gradients before comparison (negative controls).
using GradTamper = std::function<void(std::map<std::string, Matrix>&)>;

struct GradCheckOptions {
  double step = 1e-3;
  std::size_t samples_per_param = 50;  // every coordinate when the parameter is smaller
  std::uint64_t seed = 0;
  GradTamper tamper;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences (f(x+h) - f(x-h)) / 2h against the analytic gradient,
// relative error |a - n| / max(|a|, |n|, 1e-8). Parameter values are
// restored on return.
GradCheckResult gradient_check(const LossFn& loss_fn, ParamStore& params, const GradCheckOptions& opts = {});

}  // namespace slubench::nn
