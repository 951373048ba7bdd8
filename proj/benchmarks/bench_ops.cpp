// Microbenchmarks for the hot primitives: convolution, axial attention,
// normalization, the residual blocks and a full forward/backward step.

#include <benchmark/benchmark.h>

#include <random>

#include "mbt/blocks.hpp"
#include "mbt/losses.hpp"
#include "mbt/model.hpp"

namespace {

using mbt::Graph;
using mbt::Parameter;
using mbt::Shape;
using mbt::Tensor;

Tensor<float> random_tensor(const Shape& shape, std::mt19937_64& rng) {
    return Tensor<float>::uniform(shape, rng, -1.0f, 1.0f);
}

void BM_Conv2d3x3(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
    std::mt19937_64 rng(1);
    Tensor<float> x = random_tensor(Shape{1, c, hw, hw}, rng);
    Parameter<float> w{"w", random_tensor(Shape{c, c, 3, 3}, rng)};
    Parameter<float> b{"b", Tensor<float>::zeros(Shape{c})};
    for (auto _ : state) {
        Graph<float> g;
        auto y = mbt::ops::conv2d(g, g.constant(x), g.param(w), g.param(b), 1, 1);
        benchmark::DoNotOptimize(g.val(y).data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c) * c * hw * hw * 9);
}
BENCHMARK(BM_Conv2d3x3)->Args({16, 32})->Args({32, 32})->Args({64, 16});

void BM_AxialAttention(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
    const int span = static_cast<int>(state.range(2));
    const int d = c / 2;
    std::mt19937_64 rng(2);
    Tensor<float> x = random_tensor(Shape{1, c, hw, hw}, rng);
    Parameter<float> wq{"wq", random_tensor(Shape{d, c}, rng)};
    Parameter<float> wk{"wk", random_tensor(Shape{d, c}, rng)};
    Parameter<float> wv{"wv", random_tensor(Shape{d, c}, rng)};
    Parameter<float> rq{"rq", random_tensor(Shape{2 * span - 1, d}, rng)};
    Parameter<float> rk{"rk", random_tensor(Shape{2 * span - 1, d}, rng)};
    Parameter<float> rv{"rv", random_tensor(Shape{2 * span - 1, d}, rng)};
    for (auto _ : state) {
        Graph<float> g;
        auto y = mbt::ops::axial_attention(g, g.constant(x), g.param(wq), g.param(wk),
                                           g.param(wv), g.param(rq), g.param(rk), g.param(rv),
                                           3, span);
        benchmark::DoNotOptimize(g.val(y).data());
    }
}
BENCHMARK(BM_AxialAttention)->Args({32, 16, 7})->Args({32, 32, 7})->Args({64, 16, 17});

void BM_InstanceNorm(benchmark::State& state) {
    const int c = 32, hw = 64;
    std::mt19937_64 rng(3);
    Tensor<float> x = random_tensor(Shape{1, c, hw, hw}, rng);
    Parameter<float> scale{"s", Tensor<float>::full(Shape{c}, 1.0f)};
    Parameter<float> shift{"t", Tensor<float>::zeros(Shape{c})};
    for (auto _ : state) {
        Graph<float> g;
        auto y = mbt::ops::instance_norm(g, g.constant(x), g.param(scale), g.param(shift));
        benchmark::DoNotOptimize(g.val(y).data());
    }
}
BENCHMARK(BM_InstanceNorm);

void BM_ConvResidualBlock(benchmark::State& state) {
    std::mt19937_64 rng(4);
    mbt::ConvResidualBlock<float> block(16, 32, 2, rng);
    Tensor<float> x = random_tensor(Shape{1, 16, 64, 64}, rng);
    for (auto _ : state) {
        Graph<float> g;
        auto y = block.forward(g, g.constant(x));
        benchmark::DoNotOptimize(g.val(y).data());
    }
}
BENCHMARK(BM_ConvResidualBlock);

void BM_TransformerBlock(benchmark::State& state) {
    std::mt19937_64 rng(5);
    mbt::ResidualTransformerBlock<float> block(32, 2, 9, rng);
    Tensor<float> x = random_tensor(Shape{1, 32, 16, 16}, rng);
    for (auto _ : state) {
        Graph<float> g;
        auto y = block.forward(g, g.constant(x));
        benchmark::DoNotOptimize(g.val(y).data());
    }
}
BENCHMARK(BM_TransformerBlock);

void BM_ModelStep(benchmark::State& state) {
    mbt::ModelConfig cfg;
    cfg.widths = {8, 16, 32, 64};
    cfg.heads = 2;
    cfg.span = 9;
    cfg.input_h = cfg.input_w = 64;
    mbt::MBTNet<float> model(cfg, 11);
    std::mt19937_64 rng(6);
    Tensor<float> img = Tensor<float>::uniform(Shape{1, 1, 64, 64}, rng, 0.0f, 1.0f);
    mbt::MaskTriplet<float> masks;
    masks.final_mask = Tensor<float>::zeros(Shape{1, 1, 64, 64});
    masks.edge_mask = Tensor<float>::zeros(Shape{1, 1, 64, 64});
    masks.body_mask = Tensor<float>::full(Shape{1, 1, 64, 64}, 1.0f);
    mbt::LossWeights w;
    for (auto _ : state) {
        Graph<float> g;
        auto out = model.forward(g, g.constant(img));
        auto loss = mbt::joint_loss(g, out, masks, w);
        model.zero_grads();
        g.backward(loss.total);
        benchmark::DoNotOptimize(model.parameters().front()->grad.data());
    }
}
BENCHMARK(BM_ModelStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
