#pragma once

#include <stdexcept>
#include <string>

namespace anomet {

// Malformed or inconsistent input data: bad files, impossible splits,
// reference sets that cannot be built from what was given.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown at runtime: non-finite losses or gradients,
// vectors that cannot be normalized.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace anomet
