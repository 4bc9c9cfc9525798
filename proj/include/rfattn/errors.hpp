#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rfattn {

/// Invalid configuration or spec fields (bad tokens, counts, parameter sets).
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or length mismatch between operands.
class shape_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/inf reaching an output or a decomposition failing numerically.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An attention row whose estimated normalizer is zero or negative.
class degenerate_row_error : public numeric_error {
 public:
  degenerate_row_error(std::size_t row, const std::string& what)
      : numeric_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Request exceeding a fixed internal table (e.g. the prime table).
class capacity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rfattn
