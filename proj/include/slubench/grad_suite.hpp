#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slubench/nn/gradcheck.hpp"

// Finite-difference checks of every shipped block on small random inputs.
// Block inputs are registered as parameters so their gradients are checked
// too; matrix outputs are reduced with a fixed random projection.
namespace slubench::grad_suite {

struct Entry {
  std::string block;
  nn::GradCheckResult result;
};

// Known block names, in suite order.
const std::vector<std::string>& block_names();

// Throws ContractError for an unknown name.
Entry check_block(const std::string& block, std::uint64_t seed, const nn::GradCheckOptions& opts = {});
std::vector<Entry> run_all(std::uint64_t seed, const nn::GradCheckOptions& opts = {});

// The attention check with one parameter's analytic gradient scaled by 1.1.
Entry corrupted_control(std::uint64_t seed);

}  // namespace slubench::grad_suite
