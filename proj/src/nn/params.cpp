#include "slubench/nn/params.hpp"

#include <algorithm>
#include <cmath>

#include "slubench/errors.hpp"
#include "slubench/rng.hpp"
#include "slubench/text.hpp"

namespace slubench::nn {

Parameter& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols, Init init) {
  Matrix m(rows, cols);
  Rng rng(stream_seed(seed_, "param/" + name));
  double bound = 0.0;
  switch (init) {
    case Init::fan_in_uniform:
      bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(rows, 1)));
      break;
    case Init::embedding:
      bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(cols, 1)));
      break;
    case Init::zeros:
      break;
    case Init::ones:
      m.fill(1.0);
      break;
  }
  if (bound > 0.0)
    for (auto& v : m.data) v = rng.uniform(-bound, bound);
  return add(name, std::move(m));
}

Parameter& ParamStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ContractError("parameter '" + name + "' already registered");
  Parameter p;
  p.grad = Matrix(value.rows, value.cols);
  p.value = std::move(value);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad = Matrix(p.value.rows, p.value.cols);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_)
    for (double g : p.grad.data) s += g * g;
  return std::sqrt(s);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

double sgd_step(ParamStore& params, double lr, double clip) {
  const double norm = params.grad_norm();
  const double factor = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  for (auto& [_, p] : params) {
    if (p.grad.data.empty()) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value.data[i] -= lr * factor * p.grad.data[i];
  }
  return norm;
}

}  // namespace slubench::nn
