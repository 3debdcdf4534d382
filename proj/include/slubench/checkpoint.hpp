#pragma once

#include <string>

#include "slubench/models.hpp"

// Text checkpoint layout:
//
//   SLUBENCH-CHECKPOINT 1
//   [config]
//   key = value            (one ModelConfig field per line)
//   [labels]
//   intent <label>         (index order)
//   slot <tag>             (index order)
//   [vocab]
//   <token>                (index order, specials first)
//   [params]
//   P <name> <rows> <cols>
//   <row-major values separated by spaces, shortest round-trip form>
//
// Serialization is canonical, so equal models give identical bytes.
namespace slubench::checkpoint {

inline constexpr const char* kMagic = "SLUBENCH-CHECKPOINT 1";

std::string serialize(const models::Model& model);
// ParseError with a line number on malformed input or a parameter set that
// does not match the configuration.
models::Model parse(const std::string& text);

void save(const std::string& path, const models::Model& model);
models::Model load(const std::string& path);

}  // namespace slubench::checkpoint
