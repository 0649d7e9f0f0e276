#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "tportal/adjustments.hpp"
#include "tportal/features.hpp"
#include "tportal/kernels.hpp"
#include "tportal/synthworld.hpp"

namespace {

using namespace tportal;

struct Batch {
  nn::Network net;
  linalg::Matrix x, y;
  std::vector<std::size_t> rows;
};

Batch make_batch(std::size_t n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Batch b{nn::Network({.inputs = 40, .trunk = 32, .head = 16, .outputs = 3}), linalg::Matrix(n, 40),
          linalg::Matrix(n, 3), std::vector<std::size_t>(n)};
  b.net.init_he(rng);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 40; ++c) b.x(r, c) = g(rng);
    for (std::size_t c = 0; c < 3; ++c) b.y(r, c) = g(rng);
  }
  std::iota(b.rows.begin(), b.rows.end(), 0);
  return b;
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)));
  std::vector<double> grad(b.net.parameters().size());
  for (auto _ : state) {
    const double loss = Parallel
                            ? kernels::batch_gradient_parallel(b.net, b.x, b.y, b.rows, nullptr, grad)
                            : kernels::batch_gradient_serial(b.net, b.x, b.y, b.rows, nullptr, grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_BatchGradient, false)->Arg(64)->Arg(1024)->Arg(8192)->Name("gradient/serial");
BENCHMARK_TEMPLATE(BM_BatchGradient, true)->Arg(64)->Arg(1024)->Arg(8192)->Name("gradient/parallel");

template <bool Parallel>
void BM_Predict(benchmark::State& state) {
  const auto b = make_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto out = Parallel ? kernels::predict_parallel(b.net, b.x) : kernels::predict_serial(b.net, b.x);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_Predict, false)->Arg(8192)->Name("predict/serial");
BENCHMARK_TEMPLATE(BM_Predict, true)->Arg(8192)->Name("predict/parallel");

const synth::World& small_world() {
  static const synth::World w = [] {
    synth::WorldConfig cfg;
    cfg.seasons = 2;
    return synth::generate(cfg);
  }();
  return w;
}

template <features::Execution Exec>
void BM_Features(benchmark::State& state) {
  const auto& w = small_world();
  const ratings::RatingHistory history = ratings::replay(w.corpus, w.topology).history;
  const adjust::AdjustmentPriors priors(history, {});
  for (auto _ : state) {
    auto store = features::build_features(w.corpus, {}, priors, Exec);
    benchmark::DoNotOptimize(store);
  }
}
BENCHMARK_TEMPLATE(BM_Features, features::Execution::Serial)
    ->Unit(benchmark::kMillisecond)
    ->Name("features/serial");
BENCHMARK_TEMPLATE(BM_Features, features::Execution::Parallel)
    ->Unit(benchmark::kMillisecond)
    ->Name("features/parallel");

}  // namespace

BENCHMARK_MAIN();
