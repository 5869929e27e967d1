#pragma once

#include <stdexcept>
#include <string>

namespace camot {

// Malformed user input: bad files, bad arguments, dimension mismatches.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariant. Indicates a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace camot
