#include "slubench/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slubench/errors.hpp"
#include "slubench/rng.hpp"

namespace slubench::nn {

namespace {

double eval(const LossFn& f, const ParamStore& ps) {
  Graph g;
  return f(g, ps).item();
}

}  // namespace

GradCheckResult gradient_check(const LossFn& loss_fn, ParamStore& params, const GradCheckOptions& opts) {
  if (!(opts.step > 0.0)) throw ContractError("gradient_check: step must be positive");
  std::map<std::string, Matrix> analytic;
  {
    Graph g;
    Tensor loss = loss_fn(g, params);
    g.backward(loss);
    analytic = g.param_grads();
  }
  if (opts.tamper) opts.tamper(analytic);

  GradCheckResult res;
  for (auto& [name, param] : params) {
    auto it = analytic.find(name);
    Matrix zeros(param.value.rows, param.value.cols);
    const Matrix& a = it == analytic.end() ? zeros : it->second;
    const std::size_t n = param.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > opts.samples_per_param) {
      Rng rng(opts.seed, "gradcheck/" + name);
      shuffle_in_place(coords, rng);
      coords.resize(opts.samples_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      double& x = param.value.data[idx];
      const double orig = x;
      x = orig + opts.step;
      double fp = eval(loss_fn, params);
      x = orig - opts.step;
      double fm = eval(loss_fn, params);
      x = orig;
      double num = (fp - fm) / (2.0 * opts.step);
      double an = a.data[idx];
      double rel = std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-8});
      ++res.coordinates;
      if (rel > res.max_rel_error || res.worst_param.empty()) {
        if (rel >= res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst_param = name;
          res.worst_index = idx;
          res.worst_analytic = an;
          res.worst_numeric = num;
        }
      }
    }
  }
  return res;
}

}  // namespace slubench::nn
