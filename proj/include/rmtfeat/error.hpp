#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rmtfeat {

// Base class for every data/validation failure raised by the library.
// The CLI maps these to exit code 2; argument problems map to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value failed to parse or was NaN/Inf at a known (row, col) position.
class NonFiniteValue : public Error {
 public:
  NonFiniteValue(std::size_t row, std::size_t col);
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

// A channel had zero sample variance inside a window (dead electrode).
class ZeroVarianceChannel : public Error {
 public:
  explicit ZeroVarianceChannel(std::size_t channel);
  std::size_t channel() const { return channel_; }

 private:
  std::size_t channel_;
};

}  // namespace rmtfeat
