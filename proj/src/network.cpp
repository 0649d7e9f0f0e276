#include "tportal/network.hpp"

#include <cmath>
#include <string>

#include "tportal/error.hpp"

namespace tportal::nn {

std::size_t Architecture::parameter_count() const {
  return trunk * inputs + trunk + outputs * (head * trunk + 2 * head + 1);
}

void Workspace::resize(const Architecture& a) {
  a1.resize(a.trunk);
  h1.resize(a.trunk);
  dh1.resize(a.trunk);
  a2.resize(a.head * a.outputs);
  h2.resize(a.head * a.outputs);
  out.resize(a.outputs);
}

Network::Network(Architecture arch) : arch_(arch) {
  if (arch.inputs == 0 || arch.trunk == 0 || arch.head == 0 || arch.outputs == 0) {
    throw Error(ErrorCode::InvalidArgument, "network dimensions must be positive");
  }
  params_.assign(arch.parameter_count(), 0.0);
}

std::size_t Network::head_offset(std::size_t k) const {
  return b1_offset() + arch_.trunk + k * head_size();
}

void Network::init_he(std::mt19937_64& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(arch_.inputs));
  for (std::size_t i = 0; i < arch_.trunk * arch_.inputs; ++i) params_[i] = s1 * unit(rng);
  const double s2 = std::sqrt(2.0 / static_cast<double>(arch_.trunk));
  const double s3 = std::sqrt(1.0 / static_cast<double>(arch_.head));
  for (std::size_t k = 0; k < arch_.outputs; ++k) {
    const std::size_t h = head_offset(k);
    for (std::size_t i = 0; i < arch_.head * arch_.trunk; ++i) params_[h + i] = s2 * unit(rng);
    const std::size_t wo = h + arch_.head * arch_.trunk + arch_.head;
    for (std::size_t i = 0; i < arch_.head; ++i) params_[wo + i] = s3 * unit(rng);
  }
}

void Network::check_shapes(std::span<const double> x, std::size_t out_size) const {
  if (x.size() != arch_.inputs || out_size != arch_.outputs) {
    throw Error(ErrorCode::ShapeMismatch,
                "network expects " + std::to_string(arch_.inputs) + " inputs and " +
                    std::to_string(arch_.outputs) + " outputs, got " + std::to_string(x.size()) +
                    " and " + std::to_string(out_size));
  }
}

void Network::forward_impl(std::span<const double> x, std::span<const double> mask,
                           Workspace& ws) const {
  const std::size_t T = arch_.trunk, I = arch_.inputs, H = arch_.head;
  const double* w1 = params_.data();
  const double* b1 = params_.data() + b1_offset();
  for (std::size_t t = 0; t < T; ++t) {
    double a = b1[t];
    const double* row = w1 + t * I;
    for (std::size_t i = 0; i < I; ++i) a += row[i] * x[i];
    ws.a1[t] = a;
    ws.h1[t] = a > 0.0 ? a : 0.0;
    if (!mask.empty()) ws.h1[t] *= mask[t];
  }
  for (std::size_t k = 0; k < arch_.outputs; ++k) {
    const double* wh = params_.data() + head_offset(k);
    const double* bh = wh + H * T;
    const double* wo = bh + H;
    const double bo = wo[H];
    double o = bo;
    for (std::size_t h = 0; h < H; ++h) {
      double a = bh[h];
      const double* row = wh + h * T;
      for (std::size_t t = 0; t < T; ++t) a += row[t] * ws.h1[t];
      ws.a2[k * H + h] = a;
      const double act = a > 0.0 ? a : 0.0;
      ws.h2[k * H + h] = act;
      o += wo[h] * act;
    }
    ws.out[k] = o;
  }
}

void Network::forward(std::span<const double> x, std::span<double> out) const {
  Workspace ws;
  forward(x, out, ws);
}

void Network::forward(std::span<const double> x, std::span<double> out, Workspace& ws) const {
  check_shapes(x, out.size());
  ws.resize(arch_);
  forward_impl(x, {}, ws);
  std::copy(ws.out.begin(), ws.out.end(), out.begin());
}

double Network::accumulate_gradient(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> mask, double scale,
                                    std::span<double> grad, Workspace& ws) const {
  check_shapes(x, y.size());
  if (grad.size() != params_.size() || (!mask.empty() && mask.size() != arch_.trunk)) {
    throw Error(ErrorCode::ShapeMismatch, "gradient or mask buffer has the wrong size");
  }
  ws.resize(arch_);
  forward_impl(x, mask, ws);

  const std::size_t T = arch_.trunk, I = arch_.inputs, H = arch_.head;
  std::fill(ws.dh1.begin(), ws.dh1.end(), 0.0);
  double sse = 0.0;
  for (std::size_t k = 0; k < arch_.outputs; ++k) {
    const double err = ws.out[k] - y[k];
    sse += err * err;
    const double g = 2.0 * err * scale;
    const std::size_t off = head_offset(k);
    const double* wh = params_.data() + off;
    const double* wo = wh + H * T + H;
    double* gwh = grad.data() + off;
    double* gbh = gwh + H * T;
    double* gwo = gbh + H;
    gwo[H] += g;
    for (std::size_t h = 0; h < H; ++h) {
      gwo[h] += g * ws.h2[k * H + h];
      if (ws.a2[k * H + h] <= 0.0) continue;
      const double da = g * wo[h];
      gbh[h] += da;
      double* grow = gwh + h * T;
      const double* row = wh + h * T;
      for (std::size_t t = 0; t < T; ++t) {
        grow[t] += da * ws.h1[t];
        ws.dh1[t] += da * row[t];
      }
    }
  }
  double* gw1 = grad.data();
  double* gb1 = grad.data() + b1_offset();
  for (std::size_t t = 0; t < T; ++t) {
    if (ws.a1[t] <= 0.0) continue;
    const double da = ws.dh1[t] * (mask.empty() ? 1.0 : mask[t]);
    if (da == 0.0) continue;
    gb1[t] += da;
    double* row = gw1 + t * I;
    for (std::size_t i = 0; i < I; ++i) row[i] += da * x[i];
  }
  return sse;
}

}  // namespace tportal::nn
