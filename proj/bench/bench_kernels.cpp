// Reference (serial) vs OpenMP kernels on the shapes the compact network sees.
#include <benchmark/benchmark.h>

#include <vector>

#include "fdc/nn/kernels.hpp"
#include "fdc/nn/network.hpp"
#include "fdc/random.hpp"

namespace k = fdc::nn::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
    fdc::Rng rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) x = u(rng);
    return v;
}

// args: batch, in channels, out channels, spatial size
k::ConvShape conv_shape(const benchmark::State& st) {
    const auto a = [&](int i) { return static_cast<std::size_t>(st.range(i)); };
    return {a(0), a(1), a(2), a(3), a(3)};
}

template <bool Parallel>
void conv_forward(benchmark::State& st) {
    const auto s = conv_shape(st);
    const auto in = noise(s.batch * s.in_channels * s.height * s.width, 1);
    const auto w = noise(s.out_channels * s.in_channels * 9, 2);
    const auto b = noise(s.out_channels, 3);
    std::vector<float> out(s.batch * s.out_channels * s.height * s.width);
    for (auto _ : st) {
        if constexpr (Parallel)
            k::parallel::conv3x3_forward<float>(in, w, b, out, s);
        else
            k::reference::conv3x3_forward<float>(in, w, b, out, s);
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * s.batch * s.out_channels * s.in_channels *
                                                   s.height * s.width * 9));
}

template <bool Parallel>
void conv_backward(benchmark::State& st) {
    const auto s = conv_shape(st);
    const auto in = noise(s.batch * s.in_channels * s.height * s.width, 1);
    const auto w = noise(s.out_channels * s.in_channels * 9, 2);
    const auto go = noise(s.batch * s.out_channels * s.height * s.width, 3);
    std::vector<float> gi(in.size()), gw(w.size()), gb(s.out_channels);
    for (auto _ : st) {
        if constexpr (Parallel) {
            k::parallel::conv3x3_backward_input<float>(go, w, gi, s);
            k::parallel::conv3x3_backward_params<float>(in, go, gw, gb, s);
        } else {
            k::reference::conv3x3_backward_input<float>(go, w, gi, s);
            k::reference::conv3x3_backward_params<float>(in, go, gw, gb, s);
        }
        benchmark::DoNotOptimize(gi.data());
        benchmark::DoNotOptimize(gw.data());
    }
}

template <bool Parallel>
void dense_forward(benchmark::State& st) {
    const k::DenseShape s{static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)),
                          static_cast<std::size_t>(st.range(2))};
    const auto in = noise(s.batch * s.in_features, 1);
    const auto w = noise(s.in_features * s.out_features, 2);
    const auto b = noise(s.out_features, 3);
    std::vector<float> out(s.batch * s.out_features);
    for (auto _ : st) {
        if constexpr (Parallel)
            k::parallel::dense_forward<float>(in, w, b, out, s);
        else
            k::reference::dense_forward<float>(in, w, b, out, s);
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Parallel>
void compact_train_step(benchmark::State& st) {
    fdc::nn::Network net(fdc::nn::compact_fdc());
    net.initialize(1);
    net.set_backend(Parallel ? fdc::nn::Backend::Parallel : fdc::nn::Backend::Reference);
    const auto batch = static_cast<std::size_t>(st.range(0));
    const auto x = noise(net.spec().input.size() * batch, 4);
    std::vector<std::uint8_t> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
    for (auto _ : st) {
        auto [loss, grads] = net.loss_and_gradients(x, labels);
        benchmark::DoNotOptimize(loss.loss);
    }
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({10, 1, 8, 56})->Args({10, 8, 16, 28})->Args({10, 16, 32, 14})->Args({1, 64, 64, 56});
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/reference")->Apply(conv_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_backward<false>)->Name("conv_backward/reference")->Apply(conv_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(dense_forward<false>)->Name("dense_forward/reference")->Args({100, 1568, 64})->Args({1, 25088, 4096});
BENCHMARK(dense_forward<true>)->Name("dense_forward/parallel")->Args({100, 1568, 64})->Args({1, 25088, 4096});
BENCHMARK(compact_train_step<false>)->Name("compact_step/reference")->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(compact_train_step<true>)->Name("compact_step/parallel")->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
