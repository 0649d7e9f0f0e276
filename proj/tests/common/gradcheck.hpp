#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tportal/network.hpp"

namespace tportal::testing {

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t points = 0;
  /// Draws discarded because a perturbation flipped a ReLU on or off.
  std::size_t rejected = 0;
};

/// Analytic gradient of the squared error against central differences, over
/// `points` random (parameters, x, y) draws. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, floor).
///
/// With the activation pattern held fixed the network output is linear in any
/// single parameter, so the loss is quadratic along each coordinate and the
/// central difference is exact up to roundoff. Draws where some perturbation
/// changes the pattern are rejected, which lets `eps` be large enough to keep
/// roundoff small.
inline GradCheck gradient_check(const nn::Architecture& arch, std::size_t points, std::uint64_t seed,
                                double eps = 1e-4, double floor = 1e-6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0), jitter(0.0, 0.05);
  GradCheck out;
  nn::Workspace ws;
  std::vector<double> x(arch.inputs), y(arch.outputs), o(arch.outputs), grad;
  std::vector<bool> pattern;
  auto active = [&] {
    std::vector<bool> p;
    for (double a : ws.a1) p.push_back(a > 0.0);
    for (double a : ws.a2) p.push_back(a > 0.0);
    return p;
  };
  // returns the loss, or NaN when the activation pattern moved
  auto sse = [&](const nn::Network& net) {
    net.forward(x, o, ws);
    if (active() != pattern) return std::nan("");
    double s = 0.0;
    for (std::size_t k = 0; k < arch.outputs; ++k) s += (o[k] - y[k]) * (o[k] - y[k]);
    return s;
  };
  while (out.points < points) {
    nn::Network net(arch);
    net.init_he(rng);
    for (double& p : net.parameters()) p += jitter(rng);
    for (double& v : x) v = g(rng);
    for (double& v : y) v = g(rng);
    net.forward(x, o, ws);
    pattern = active();
    grad.assign(net.parameters().size(), 0.0);
    net.accumulate_gradient(x, y, {}, 1.0, grad, ws);
    auto params = net.parameters();
    double worst = 0.0;
    bool crossed = false;
    for (std::size_t i = 0; i < params.size() && !crossed; ++i) {
      const double keep = params[i];
      params[i] = keep + eps;
      const double up = sse(net);
      params[i] = keep - eps;
      const double down = sse(net);
      params[i] = keep;
      if (std::isnan(up) || std::isnan(down)) {
        crossed = true;
        break;
      }
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
    }
    if (crossed) {
      ++out.rejected;
      continue;
    }
    out.max_relative_error = std::max(out.max_relative_error, worst);
    ++out.points;
  }
  return out;
}

}  // namespace tportal::testing
