#pragma once

#include <stdexcept>
#include <string>

namespace slubench {

// A caller broke an operation's precondition or an input violated a
// documented invariant. The CLI maps this to exit status 1.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input (metadata, lattices, WCNs, configs, checkpoints).
// The CLI maps this and IoError to exit status 2.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slubench
