#include "tportal/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "tportal/error.hpp"

namespace tportal::linalg {

namespace {

constexpr double kSingularRatio = 1e-14;
constexpr double kRidgeRatio = 1e-10;
constexpr double kRidgeLambda = 1e-8;

/// In-place Cholesky; returns the smallest pivot relative to the largest diagonal.
double cholesky(Matrix& a) {
  const std::size_t p = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, a(i, i));
  double min_ratio = 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    min_ratio = std::min(min_ratio, max_diag > 0.0 ? d / max_diag : 0.0);
    if (!(d > 0.0)) return min_ratio;
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  return min_ratio;
}

std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  const std::size_t p = l.rows();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l(i, k) * b[k];
    b[i] /= l(i, i);
  }
  for (std::size_t i = p; i-- > 0;) {
    for (std::size_t k = i + 1; k < p; ++k) b[i] -= l(k, i) * b[k];
    b[i] /= l(i, i);
  }
  return b;
}

}  // namespace

OlsFit ols(const Matrix& design, std::span<const double> y, bool first_column_is_intercept) {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  if (y.size() != n) throw Error(ErrorCode::ShapeMismatch, "design and target lengths differ");
  if (p == 0 || n < p) throw Error(ErrorCode::InsufficientData, "fewer rows than coefficients");

  std::vector<double> center(p, 0.0);
  std::vector<double> scale(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    if (first_column_is_intercept && j == 0) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += design(i, j);
    mean /= static_cast<double>(n);
    if (!first_column_is_intercept) mean = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (design(i, j) - mean) * (design(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw Error(ErrorCode::SingularDesign, "regressor " + std::to_string(j) + " is constant");
    }
    center[j] = mean;
    scale[j] = sd;
  }

  Matrix a(p, p);
  std::vector<double> b(p, 0.0);
  std::vector<double> z(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z[j] = (design(i, j) - center[j]) / scale[j];
    for (std::size_t j = 0; j < p; ++j) {
      b[j] += z[j] * y[i];
      for (std::size_t k = 0; k <= j; ++k) a(j, k) += z[j] * z[k];
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = j + 1; k < p; ++k) a(j, k) = a(k, j);

  OlsFit fit;
  fit.n = n;
  Matrix l = a;
  const double ratio = cholesky(l);
  if (ratio < kRidgeRatio) {
    if (ratio < kSingularRatio) throw Error(ErrorCode::SingularDesign, "collinear regressors");
    double max_diag = 0.0;
    for (std::size_t j = 0; j < p; ++j) max_diag = std::max(max_diag, a(j, j));
    l = a;
    for (std::size_t j = 0; j < p; ++j) l(j, j) += kRidgeLambda * max_diag;
    if (cholesky(l) <= 0.0) throw Error(ErrorCode::SingularDesign, "ridge fallback failed");
    fit.ridge_used = true;
  }
  const std::vector<double> gamma = cholesky_solve(l, b);

  fit.coefficients.assign(p, 0.0);
  double intercept_shift = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    fit.coefficients[j] = gamma[j] / scale[j];
    intercept_shift += fit.coefficients[j] * center[j];
  }
  if (first_column_is_intercept) fit.coefficients[0] -= intercept_shift;

  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < p; ++j) pred += design(i, j) * fit.coefficients[j];
    rss += (y[i] - pred) * (y[i] - pred);
  }
  fit.residual_variance = n > p ? rss / static_cast<double>(n - p) : 0.0;
  return fit;
}

std::vector<double> normal_gradient(const Matrix& design, std::span<const double> y,
                                    std::span<const double> coefficients) {
  std::vector<double> g(design.cols(), 0.0);
  for (std::size_t i = 0; i < design.rows(); ++i) {
    double r = -y[i];
    for (std::size_t j = 0; j < design.cols(); ++j) r += design(i, j) * coefficients[j];
    for (std::size_t j = 0; j < design.cols(); ++j) g[j] += design(i, j) * r;
  }
  return g;
}

}  // namespace tportal::linalg
