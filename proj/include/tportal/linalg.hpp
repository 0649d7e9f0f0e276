#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tportal::linalg {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct OlsFit {
  std::vector<double> coefficients;
  std::size_t n = 0;
  double residual_variance = 0.0;  // RSS / (n - p)
  bool ridge_used = false;
};

/// Ordinary least squares through the normal equations. Non-intercept columns
/// are centred and scaled before the Cholesky solve; a near-singular system
/// falls back to ridge with lambda = 1e-8 (relative to the largest diagonal).
/// Throws InsufficientData when n < p and SingularDesign for constant or
/// numerically collinear regressors.
OlsFit ols(const Matrix& design, std::span<const double> y, bool first_column_is_intercept = true);

/// X^T (X b - y), the gradient of half the squared error.
std::vector<double> normal_gradient(const Matrix& design, std::span<const double> y,
                                    std::span<const double> coefficients);

}  // namespace tportal::linalg
