#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdp {

// Raised when an estimation subroutine cannot honor its episode budget.
class BudgetTooSmallError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when some state has zero reach probability under every intervention.
class UnreachableStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the brute-force oracle would need too many lattice points.
class InfeasibleOracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised on malformed config or instance text.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix; just enough for transition tables and estimates.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace cmdp
