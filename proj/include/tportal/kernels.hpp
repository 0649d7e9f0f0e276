#pragma once

#include <cstddef>
#include <span>

#include "tportal/linalg.hpp"
#include "tportal/network.hpp"

namespace tportal::kernels {

/// Examples per work item in the parallel kernels. Chunk boundaries depend
/// only on the batch, so results do not depend on the thread count.
inline constexpr std::size_t kChunk = 8;

/// Mean squared error over (batch x outputs) for the examples `rows` of X/Y,
/// and its gradient written to `grad`. `masks`, if given, holds one dropout
/// mask row per batch position. Straightforward reference version.
double batch_gradient_serial(const nn::Network& net, const linalg::Matrix& x,
                             const linalg::Matrix& y, std::span<const std::size_t> rows,
                             const linalg::Matrix* masks, std::span<double> grad);

/// OpenMP version: per-chunk partial gradients, summed in chunk order.
double batch_gradient_parallel(const nn::Network& net, const linalg::Matrix& x,
                               const linalg::Matrix& y, std::span<const std::size_t> rows,
                               const linalg::Matrix* masks, std::span<double> grad);

/// Evaluation-mode outputs for every row of X.
linalg::Matrix predict_serial(const nn::Network& net, const linalg::Matrix& x);
linalg::Matrix predict_parallel(const nn::Network& net, const linalg::Matrix& x);

/// Mean squared error of evaluation-mode outputs against Y.
double mse(const nn::Network& net, const linalg::Matrix& x, const linalg::Matrix& y);

}  // namespace tportal::kernels
