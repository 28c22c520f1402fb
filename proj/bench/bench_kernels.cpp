// Reference (nested loops, one example at a time) vs parallel (OpenMP + im2col/GEMM) kernels
// on the layer shapes the default models train with.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "lorafp/nn/aligned.hpp"
#include "lorafp/nn/kernels.hpp"

namespace {

using lorafp::nn::AlignedVector;
using lorafp::nn::kernels::ConvGeometry;
namespace ref = lorafp::nn::kernels::reference;
namespace par = lorafp::nn::kernels::parallel;

constexpr int kBatch = 32;

// Spectrogram model, first and second conv (3x3 same padding on a 256x63 input).
ConvGeometry spectrogram_conv1() { return {1, 256, 63, 8, 3, 3, 1, 1, 1, 1}; }
ConvGeometry spectrogram_conv2() { return {8, 128, 31, 16, 3, 3, 1, 1, 1, 1}; }
// IQ model, second conv (2x128 on the pooled 2-row map).
ConvGeometry iq_conv2() { return {8, 2, 992, 16, 2, 128, 0, 1, 0, 0}; }

AlignedVector<float> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> dist;
  AlignedVector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

struct ConvBuffers {
  explicit ConvBuffers(const ConvGeometry& g)
      : in(random_vector(g.in_size() * kBatch, 1)),
        weight(random_vector(g.weight_size(), 2)),
        bias(random_vector(static_cast<std::size_t>(g.out_c), 3)),
        out(g.out_size() * kBatch),
        dout(random_vector(g.out_size() * kBatch, 4)),
        din(g.in_size() * kBatch),
        dweight(g.weight_size()),
        dbias(static_cast<std::size_t>(g.out_c)) {}

  AlignedVector<float> in, weight, bias, out, dout, din, dweight, dbias;
};

void set_flops(benchmark::State& state, const ConvGeometry& g, double passes) {
  const double macs = static_cast<double>(g.out_size()) * g.in_c * g.k_h * g.k_w * kBatch;
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * macs * passes * static_cast<double>(state.iterations()),
                                                 benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

template <ConvGeometry (*Geometry)()>
void BM_ConvForwardReference(benchmark::State& state) {
  const ConvGeometry g = Geometry();
  ConvBuffers b(g);
  for (auto _ : state) {
    for (int n = 0; n < kBatch; ++n)
      ref::conv2d_forward(g, b.in.data() + n * g.in_size(), b.weight.data(), b.bias.data(),
                          b.out.data() + n * g.out_size());
    benchmark::DoNotOptimize(b.out.data());
  }
  set_flops(state, g, 1.0);
}

template <ConvGeometry (*Geometry)()>
void BM_ConvForwardParallel(benchmark::State& state) {
  const ConvGeometry g = Geometry();
  ConvBuffers b(g);
  for (auto _ : state) {
    par::conv2d_forward(g, kBatch, b.in.data(), b.weight.data(), b.bias.data(), b.out.data());
    benchmark::DoNotOptimize(b.out.data());
  }
  set_flops(state, g, 1.0);
}

template <ConvGeometry (*Geometry)()>
void BM_ConvBackwardReference(benchmark::State& state) {
  const ConvGeometry g = Geometry();
  ConvBuffers b(g);
  for (auto _ : state) {
    std::fill(b.dweight.begin(), b.dweight.end(), 0.0f);
    std::fill(b.dbias.begin(), b.dbias.end(), 0.0f);
    for (int n = 0; n < kBatch; ++n) {
      ref::conv2d_backward_data(g, b.dout.data() + n * g.out_size(), b.weight.data(), b.din.data() + n * g.in_size());
      ref::conv2d_backward_weights(g, b.in.data() + n * g.in_size(), b.dout.data() + n * g.out_size(), b.dweight.data(),
                                   b.dbias.data());
    }
    benchmark::DoNotOptimize(b.din.data());
    benchmark::DoNotOptimize(b.dweight.data());
  }
  set_flops(state, g, 2.0);
}

template <ConvGeometry (*Geometry)()>
void BM_ConvBackwardParallel(benchmark::State& state) {
  const ConvGeometry g = Geometry();
  ConvBuffers b(g);
  for (auto _ : state) {
    par::conv2d_backward(g, kBatch, b.in.data(), b.dout.data(), b.weight.data(), b.din.data(), b.dweight.data(),
                         b.dbias.data());
    benchmark::DoNotOptimize(b.din.data());
    benchmark::DoNotOptimize(b.dweight.data());
  }
  set_flops(state, g, 2.0);
}

void BM_DenseForwardReference(benchmark::State& state) {
  const int in = 32 * 32 * 7, out = 10;
  auto x = random_vector(static_cast<std::size_t>(in) * kBatch, 1);
  auto w = random_vector(static_cast<std::size_t>(in) * out, 2);
  auto bias = random_vector(out, 3);
  AlignedVector<float> y(static_cast<std::size_t>(out) * kBatch);
  for (auto _ : state) {
    ref::dense_forward(kBatch, in, out, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_DenseForwardParallel(benchmark::State& state) {
  const int in = 32 * 32 * 7, out = 10;
  auto x = random_vector(static_cast<std::size_t>(in) * kBatch, 1);
  auto w = random_vector(static_cast<std::size_t>(in) * out, 2);
  auto bias = random_vector(out, 3);
  AlignedVector<float> y(static_cast<std::size_t>(out) * kBatch);
  for (auto _ : state) {
    par::dense_forward(kBatch, in, out, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForwardReference<spectrogram_conv1>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardParallel<spectrogram_conv1>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference<spectrogram_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardParallel<spectrogram_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardReference<spectrogram_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParallel<spectrogram_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference<iq_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardParallel<iq_conv2>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseForwardReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DenseForwardParallel)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
