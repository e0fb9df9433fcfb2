#ifndef SSCIPI_ERRORS_HPP
#define SSCIPI_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sscipi {

/// Operand dimensions do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A column (or row) that must carry mass has zero sum.
class ZeroSumError : public std::domain_error {
 public:
  ZeroSumError(const std::string& what, std::int64_t index)
      : std::domain_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  std::int64_t index() const noexcept { return index_; }

 private:
  std::int64_t index_;
};

/// The iterate sits where the update direction is undefined (zero gradient,
/// vanishing snapshot overlap, zero norm).
class DegeneratePointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Relative error is undefined because f_0 equals f*.
class DegenerateMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::int64_t line)
      : std::runtime_error(line > 0 ? what + " at line " + std::to_string(line)
                                    : what),
        line_(line) {}
  std::int64_t line() const noexcept { return line_; }

 private:
  std::int64_t line_;
};

}  // namespace sscipi

#endif  // SSCIPI_ERRORS_HPP
