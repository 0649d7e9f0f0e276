#include "tportal/kernels.hpp"

#include <algorithm>
#include <vector>

#include "tportal/error.hpp"

namespace tportal::kernels {

namespace {

void check(const nn::Network& net, const linalg::Matrix& x, const linalg::Matrix& y,
           std::span<const std::size_t> rows, const linalg::Matrix* masks,
           std::span<double> grad) {
  const auto& a = net.architecture();
  if (x.cols() != a.inputs || y.cols() != a.outputs || x.rows() != y.rows() ||
      grad.size() != a.parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "batch does not match the network");
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  if (masks && (masks->rows() < rows.size() || masks->cols() != a.trunk)) {
    throw Error(ErrorCode::ShapeMismatch, "dropout mask does not match the batch");
  }
  for (std::size_t r : rows) {
    if (r >= x.rows()) throw Error(ErrorCode::ShapeMismatch, "batch row out of range");
  }
}

std::span<const double> mask_row(const linalg::Matrix* masks, std::size_t i) {
  return masks ? masks->row(i) : std::span<const double>{};
}

}  // namespace

double batch_gradient_serial(const nn::Network& net, const linalg::Matrix& x,
                             const linalg::Matrix& y, std::span<const std::size_t> rows,
                             const linalg::Matrix* masks, std::span<double> grad) {
  check(net, x, y, rows, masks, grad);
  std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 1.0 / static_cast<double>(rows.size() * y.cols());
  nn::Workspace ws;
  double sse = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sse += net.accumulate_gradient(x.row(rows[i]), y.row(rows[i]), mask_row(masks, i), scale, grad,
                                   ws);
  }
  return sse * scale;
}

double batch_gradient_parallel(const nn::Network& net, const linalg::Matrix& x,
                               const linalg::Matrix& y, std::span<const std::size_t> rows,
                               const linalg::Matrix* masks, std::span<double> grad) {
  check(net, x, y, rows, masks, grad);
  const std::size_t p = grad.size();
  const std::size_t chunks = (rows.size() + kChunk - 1) / kChunk;
  const double scale = 1.0 / static_cast<double>(rows.size() * y.cols());
  std::vector<double> partial(chunks * p, 0.0);
  std::vector<double> sse(chunks, 0.0);
  const long n = static_cast<long>(chunks);
#pragma omp parallel
  {
    nn::Workspace ws;
#pragma omp for schedule(static)
    for (long c = 0; c < n; ++c) {
      const std::size_t cu = static_cast<std::size_t>(c);
      std::span<double> g(partial.data() + cu * p, p);
      const std::size_t end = std::min(rows.size(), (cu + 1) * kChunk);
      for (std::size_t i = cu * kChunk; i < end; ++i) {
        sse[cu] += net.accumulate_gradient(x.row(rows[i]), y.row(rows[i]), mask_row(masks, i),
                                           scale, g, ws);
      }
    }
  }
  std::copy(partial.begin(), partial.begin() + static_cast<std::ptrdiff_t>(p), grad.begin());
  double total = sse[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    const double* g = partial.data() + c * p;
    for (std::size_t k = 0; k < p; ++k) grad[k] += g[k];
    total += sse[c];
  }
  return total * scale;
}

linalg::Matrix predict_serial(const nn::Network& net, const linalg::Matrix& x) {
  linalg::Matrix out(x.rows(), net.architecture().outputs);
  nn::Workspace ws;
  for (std::size_t r = 0; r < x.rows(); ++r) net.forward(x.row(r), out.row(r), ws);
  return out;
}

linalg::Matrix predict_parallel(const nn::Network& net, const linalg::Matrix& x) {
  linalg::Matrix out(x.rows(), net.architecture().outputs);
  const long n = static_cast<long>(x.rows());
#pragma omp parallel
  {
    nn::Workspace ws;
#pragma omp for schedule(static)
    for (long r = 0; r < n; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      net.forward(x.row(ru), out.row(ru), ws);
    }
  }
  return out;
}

double mse(const nn::Network& net, const linalg::Matrix& x, const linalg::Matrix& y) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyDataset, "no rows");
  if (y.rows() != x.rows() || y.cols() != net.architecture().outputs) {
    throw Error(ErrorCode::ShapeMismatch, "targets do not match the network");
  }
  const auto out = predict_parallel(net, x);
  double s = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double d = out(r, c) - y(r, c);
      s += d * d;
    }
  }
  return s / static_cast<double>(x.rows() * y.cols());
}

}  // namespace tportal::kernels
