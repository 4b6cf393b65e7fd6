// Kernel benchmark: OpenMP-parallel implementations (icafusion/kernels.hpp)
// against the serial reference (icafusion/serial.hpp) on generator- and
// critic-shaped workloads. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include "icafusion/kernels.hpp"
#include "icafusion/rng.hpp"
#include "icafusion/serial.hpp"

using namespace icafusion;

namespace {

struct ConvCase {
    int ic, oc, hw, stride;
};

// level-2 encoder, level-4 decoder head, critic tail
const ConvCase kCases[] = {{16, 8, 64, 1}, {96, 32, 16, 1}, {64, 128, 8, 2}};

template <bool Parallel>
void conv_forward(benchmark::State& state) {
    const ConvCase c = kCases[state.range(0)];
    Rng r(1);
    Tensor<float> in(c.ic, c.hw, c.hw), w(Shape{c.oc, c.ic, 3, 3}), b(Shape{c.oc, 1, 1, 1});
    for (auto& v : in) v = static_cast<float>(r.normal());
    for (auto& v : w) v = static_cast<float>(r.normal());
    Tensor<float> out(c.oc, kernels::conv_out_dim(c.hw, 3, c.stride, 1),
                      kernels::conv_out_dim(c.hw, 3, c.stride, 1));
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv2d_forward(out, in, w, b.data(), c.stride, 1);
        else
            serial::conv2d_forward(out, in, w, b.data(), c.stride, 1);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * out.size() * c.ic * 9);
}

template <bool Parallel>
void conv_backward_params(benchmark::State& state) {
    const ConvCase c = kCases[state.range(0)];
    Rng r(1);
    Tensor<float> in(c.ic, c.hw, c.hw);
    const int ohw = kernels::conv_out_dim(c.hw, 3, c.stride, 1);
    Tensor<float> gout(c.oc, ohw, ohw), gw(Shape{c.oc, c.ic, 3, 3}), gb(Shape{c.oc, 1, 1, 1});
    for (auto& v : in) v = static_cast<float>(r.normal());
    for (auto& v : gout) v = static_cast<float>(r.normal());
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::conv2d_backward_params(gw, gb.data(), in, gout, c.stride, 1);
        else
            serial::conv2d_backward_params(gw, gb.data(), in, gout, c.stride, 1);
        benchmark::DoNotOptimize(gw.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * gout.size() * c.ic * 9);
}

template <bool Parallel>
void conv_backward_input(benchmark::State& state) {
    const ConvCase c = kCases[state.range(0)];
    Rng r(1);
    Tensor<float> w(Shape{c.oc, c.ic, 3, 3});
    const int ohw = kernels::conv_out_dim(c.hw, 3, c.stride, 1);
    Tensor<float> gout(c.oc, ohw, ohw), gin(c.ic, c.hw, c.hw);
    for (auto& v : w) v = static_cast<float>(r.normal());
    for (auto& v : gout) v = static_cast<float>(r.normal());
    for (auto _ : state) {
        gin.zero();
        if constexpr (Parallel)
            kernels::conv2d_backward_input(gin, gout, w, c.stride, 1);
        else
            serial::conv2d_backward_input(gin, gout, w, c.stride, 1);
        benchmark::DoNotOptimize(gin.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * gout.size() * c.ic * 9);
}

template <bool Parallel>
void pooling(benchmark::State& state) {
    Rng r(1);
    Tensor<float> in(64, 64, 64), cmax(1, 64, 64), gmax(64, 1, 1);
    std::vector<int> arg;
    for (auto& v : in) v = static_cast<float>(r.normal());
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::channel_max_pool(cmax, arg, in);
            kernels::global_avg_pool(gmax, in);
        } else {
            serial::channel_max_pool(cmax, in);
            serial::global_avg_pool(gmax, in);
        }
        benchmark::DoNotOptimize(cmax.data());
    }
}

template <bool Parallel>
void upsample(benchmark::State& state) {
    Rng r(1);
    Tensor<float> in(32, 64, 64), out(32, 128, 128);
    for (auto& v : in) v = static_cast<float>(r.normal());
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::upsample2x_forward(out, in);
        else
            serial::upsample2x_forward(out, in);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK_TEMPLATE(conv_forward, true)->DenseRange(0, 2)->Name("conv_forward/omp");
BENCHMARK_TEMPLATE(conv_forward, false)->DenseRange(0, 2)->Name("conv_forward/serial");
BENCHMARK_TEMPLATE(conv_backward_params, true)->DenseRange(0, 2)->Name("conv_bwd_params/omp");
BENCHMARK_TEMPLATE(conv_backward_params, false)->DenseRange(0, 2)->Name("conv_bwd_params/serial");
BENCHMARK_TEMPLATE(conv_backward_input, true)->DenseRange(0, 2)->Name("conv_bwd_input/omp");
BENCHMARK_TEMPLATE(conv_backward_input, false)->DenseRange(0, 2)->Name("conv_bwd_input/serial");
BENCHMARK_TEMPLATE(pooling, true)->Name("pooling/omp");
BENCHMARK_TEMPLATE(pooling, false)->Name("pooling/serial");
BENCHMARK_TEMPLATE(upsample, true)->Name("upsample/omp");
BENCHMARK_TEMPLATE(upsample, false)->Name("upsample/serial");

BENCHMARK_MAIN();
