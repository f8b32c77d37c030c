// Copyright 2026 The stylenerf Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <vector>

#include "stylenerf/kernels.hpp"
#include "stylenerf/rng.hpp"

namespace {

using namespace stylenerf;

std::vector<float> random_values(std::size_t n, float lo, float hi, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = lo + (hi - lo) * rng.uniform_f();
  return v;
}

struct CompositeData {
  int rays;
  int samples;
  std::vector<float> sigma, delta, color, grad_rgb, grad_acc;
  std::vector<float> w, t, rgb, acc, gs, gc;

  CompositeData(int r, int s)
      : rays(r),
        samples(s),
        sigma(random_values(std::size_t(r) * s, 0.0f, 8.0f, 1)),
        delta(random_values(std::size_t(r) * s, 0.0f, 0.1f, 2)),
        color(random_values(3 * std::size_t(r) * s, 0.0f, 1.0f, 3)),
        grad_rgb(random_values(3 * std::size_t(r), -1.0f, 1.0f, 4)),
        grad_acc(random_values(std::size_t(r), -1.0f, 1.0f, 5)),
        w(std::size_t(r) * s),
        t(std::size_t(r) * s),
        rgb(3 * std::size_t(r)),
        acc(r),
        gs(std::size_t(r) * s),
        gc(3 * std::size_t(r) * s) {}
};

template <bool Parallel>
void BM_CompositeForward(benchmark::State& state) {
  CompositeData d(static_cast<int>(state.range(0)), 192);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::composite_forward<float>(d.rays, d.samples, d.sigma, d.delta, d.color, d.w, d.t, d.rgb,
                                                  d.acc);
    } else {
      kernels::serial::composite_forward<float>(d.rays, d.samples, d.sigma, d.delta, d.color, d.w, d.t, d.rgb,
                                                d.acc);
    }
    benchmark::DoNotOptimize(d.rgb.data());
  }
  state.SetItemsProcessed(state.iterations() * d.rays * d.samples);
}

template <bool Parallel>
void BM_CompositeBackward(benchmark::State& state) {
  CompositeData d(static_cast<int>(state.range(0)), 192);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::composite_backward<float>(d.rays, d.samples, d.sigma, d.delta, d.color, d.grad_rgb,
                                                   d.grad_acc, d.gs, d.gc);
    } else {
      kernels::serial::composite_backward<float>(d.rays, d.samples, d.sigma, d.delta, d.color, d.grad_rgb,
                                                 d.grad_acc, d.gs, d.gc);
    }
    benchmark::DoNotOptimize(d.gs.data());
  }
  state.SetItemsProcessed(state.iterations() * d.rays * d.samples);
}

template <bool Parallel>
void BM_PositionalEncode(benchmark::State& state) {
  const int count = static_cast<int>(state.range(0)), levels = 10;
  const auto in = random_values(3 * std::size_t(count), -2.0f, 2.0f, 6);
  std::vector<float> out(2 * levels * 3 * std::size_t(count));
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::positional_encode(3, count, levels, in, out);
    } else {
      kernels::serial::positional_encode(3, count, levels, in, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * count);
}

template <bool Parallel>
void BM_Im2col(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const kernels::ConvShape shape{64, side, side, 3};
  const auto image = random_values(std::size_t(64) * side * side, -1.0f, 1.0f, 7);
  std::vector<float> cols(std::size_t(64) * 9 * side * side);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::im2col_reflect(shape, image, cols);
    } else {
      kernels::serial::im2col_reflect(shape, image, cols);
    }
    benchmark::DoNotOptimize(cols.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(cols.size() * sizeof(float)));
}

template <bool Parallel>
void BM_ChannelMoments(benchmark::State& state) {
  const int pixels = static_cast<int>(state.range(0));
  const auto v = random_values(std::size_t(256) * pixels, -1.0f, 3.0f, 8);
  std::vector<float> mean(256), stddev(256);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::channel_moments(256, pixels, v, mean, stddev);
    } else {
      kernels::serial::channel_moments(256, pixels, v, mean, stddev);
    }
    benchmark::DoNotOptimize(stddev.data());
  }
  state.SetItemsProcessed(state.iterations() * 256 * pixels);
}

BENCHMARK(BM_CompositeForward<false>)->Name("composite_forward/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_CompositeForward<true>)->Name("composite_forward/parallel")->Arg(1024)->Arg(4096);
BENCHMARK(BM_CompositeBackward<false>)->Name("composite_backward/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_CompositeBackward<true>)->Name("composite_backward/parallel")->Arg(1024)->Arg(4096);
BENCHMARK(BM_PositionalEncode<false>)->Name("positional_encode/serial")->Arg(65536);
BENCHMARK(BM_PositionalEncode<true>)->Name("positional_encode/parallel")->Arg(65536);
BENCHMARK(BM_Im2col<false>)->Name("im2col_reflect/serial")->Arg(32)->Arg(64);
BENCHMARK(BM_Im2col<true>)->Name("im2col_reflect/parallel")->Arg(32)->Arg(64);
BENCHMARK(BM_ChannelMoments<false>)->Name("channel_moments/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_ChannelMoments<true>)->Name("channel_moments/parallel")->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
