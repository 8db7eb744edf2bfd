// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels at desk-training shapes.
// Run: build/bench/bench_kernels [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include "dksan/conv2d.hpp"
#include "dksan/deform_ops.hpp"
#include "dksan/rng.hpp"

using namespace dksan;

namespace {

Tensor<float> rnd(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

const Conv2dSpec kSpec = Conv2dSpec::same(16, 16, 3);
const Shape kInput{4, 16, 48, 48};

void BM_conv2d_ref(benchmark::State& state) {
  const Tensor<float> x = rnd(kInput, 1);
  const Tensor<float> w = rnd(Shape{16, 16, 3, 3}, 2);
  const Tensor<float> b = rnd(Shape{1, 16, 1, 1}, 3);
  Tensor<float> out;
  for (auto _ : state) {
    ref::conv2d_forward(x, w, &b, kSpec, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv2d_ref);

void BM_conv2d_omp(benchmark::State& state) {
  const Tensor<float> x = rnd(kInput, 1);
  const Tensor<float> w = rnd(Shape{16, 16, 3, 3}, 2);
  const Tensor<float> b = rnd(Shape{1, 16, 1, 1}, 3);
  Tensor<float> out;
  for (auto _ : state) {
    kern::conv2d_forward(x, w, &b, kSpec, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv2d_omp);

void BM_conv2d_backward_omp(benchmark::State& state) {
  const Tensor<float> x = rnd(kInput, 1);
  const Tensor<float> w = rnd(Shape{16, 16, 3, 3}, 2);
  const Tensor<float> g = rnd(kInput, 4);
  for (auto _ : state) {
    Tensor<float> gx(kInput);
    Tensor<float> gw(Shape{16, 16, 3, 3});
    kern::conv2d_backward_input(g, w, kSpec, gx);
    kern::conv2d_backward_weight(g, x, kSpec, gw);
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}
BENCHMARK(BM_conv2d_backward_omp);

void BM_deform_conv2d_ref(benchmark::State& state) {
  const Conv2dSpec spec = Conv2dSpec::same(16, 16, 3, false);
  const Shape in{4, 16, 24, 24};
  const Tensor<float> x = rnd(in, 1);
  const Tensor<float> w = rnd(Shape{16, 16, 3, 3}, 2);
  const Tensor<float> off = rnd(Shape{4, 18, 24, 24}, 3);
  const Tensor<float> mask = rnd(Shape{4, 9, 24, 24}, 4);
  Tensor<float> out;
  for (auto _ : state) {
    ref::deformable_conv2d_forward(x, w, off, mask, spec, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_deform_conv2d_ref);

void BM_deform_conv2d_omp(benchmark::State& state) {
  const Conv2dSpec spec = Conv2dSpec::same(16, 16, 3, false);
  const Shape in{4, 16, 24, 24};
  const Tensor<float> x = rnd(in, 1);
  Parameter<float> w("w", rnd(Shape{16, 16, 3, 3}, 2));
  const Tensor<float> off = rnd(Shape{4, 18, 24, 24}, 3);
  const Tensor<float> mask = rnd(Shape{4, 9, 24, 24}, 4);
  for (auto _ : state) {
    Tape<float> tp;
    Var o = deformable_conv2d(tp, tp.leaf(x), w, tp.leaf(off), tp.leaf(mask), spec);
    benchmark::DoNotOptimize(tp.value(o).data());
  }
}
BENCHMARK(BM_deform_conv2d_omp);

}  // namespace

BENCHMARK_MAIN();
