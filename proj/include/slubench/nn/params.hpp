#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "slubench/nn/matrix.hpp"

namespace slubench::nn {

struct Parameter {
  Matrix value;
  Matrix grad;
};

enum class Init {
  fan_in_uniform,  // U(-1/sqrt(rows), 1/sqrt(rows)), for x * W projections
  embedding,       // U(-1/sqrt(cols), 1/sqrt(cols)), for lookup tables
  zeros,
  ones,
};

// Named parameters. Each parameter draws its initial values from its own
// stream (seed, name), so initialization does not depend on the order of
// registration.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Throws ContractError when the name is already registered.
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols, Init init);
  // Registers the value as given (checkpoint loading).
  Parameter& add(const std::string& name, Matrix value);

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  void zero_grad();
  double grad_norm() const;
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::uint64_t seed_;
  std::map<std::string, Parameter> params_;
};

// Global-norm clipping to `clip` (skipped when clip <= 0), then
// value -= lr * grad for every parameter. Returns the norm before clipping.
// Gradients are left in place.
double sgd_step(ParamStore& params, double lr, double clip);

}  // namespace slubench::nn
