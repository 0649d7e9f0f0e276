#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace tportal::nn {

/// One dense ReLU trunk shared by all outputs; every output owns a dense ReLU
/// head layer followed by a linear scalar unit.
struct Architecture {
  std::size_t inputs = 0;
  std::size_t trunk = 32;
  std::size_t head = 16;
  std::size_t outputs = 1;

  std::size_t parameter_count() const;
  bool operator==(const Architecture&) const = default;
};

/// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<double> a1, h1, a2, h2, dh1, out;
  void resize(const Architecture& a);
};

/// Parameters live in one flat vector:
///   W1 [trunk x inputs], b1 [trunk],
///   then per output k: Wh [head x trunk], bh [head], wo [head], bo.
class Network {
 public:
  Network() = default;
  explicit Network(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return arch_.trunk * arch_.inputs; }
  std::size_t head_offset(std::size_t k) const;
  std::size_t head_size() const { return arch_.head * arch_.trunk + 2 * arch_.head + 1; }

  /// He-normal weights, zero biases.
  void init_he(std::mt19937_64& rng);

  /// Evaluation-mode forward pass. Throws ShapeMismatch.
  void forward(std::span<const double> x, std::span<double> out) const;
  void forward(std::span<const double> x, std::span<double> out, Workspace& ws) const;

  /// Adds `scale` * d(sum of squared errors)/d(params) for one example into
  /// `grad` and returns that example's sum of squared errors. `mask`, if not
  /// empty, multiplies the trunk activations (inverted dropout).
  double accumulate_gradient(std::span<const double> x, std::span<const double> y,
                             std::span<const double> mask, double scale, std::span<double> grad,
                             Workspace& ws) const;

  bool operator==(const Network&) const = default;

 private:
  void check_shapes(std::span<const double> x, std::size_t out_size) const;
  void forward_impl(std::span<const double> x, std::span<const double> mask, Workspace& ws) const;

  Architecture arch_;
  std::vector<double> params_;
};

}  // namespace tportal::nn
