// Parallel kernels vs the serial reference, at training-sized shapes.
//
//   kernel_bench --benchmark_filter=conv3x3

#include <benchmark/benchmark.h>

#include <vector>

#include "fcppn/kernels.hpp"
#include "fcppn/rng.hpp"

namespace {

namespace k = fcppn::kernels;
namespace ref = fcppn::kernels::reference;

std::vector<float> random_buffer(std::size_t n, std::uint64_t seed) {
  fcppn::Xoshiro256 rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
  return v;
}

// The CPPN hidden layer at 64x64: 48 -> 24 channels.
k::ConvDims hidden_dims(const benchmark::State& s) {
  const auto side = static_cast<std::size_t>(s.range(0));
  return {side, side, 48, 24};
}

template <bool Parallel>
void BM_conv1x1_forward(benchmark::State& state) {
  const k::ConvDims d = hidden_dims(state);
  const auto x = random_buffer(d.pixels() * d.cin, 1);
  const auto w = random_buffer(d.cin * d.cout, 2);
  const auto b = random_buffer(d.cout, 3);
  std::vector<float> y(d.pixels() * d.cout);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv1x1_forward(x.data(), w.data(), b.data(), y.data(), d);
    } else {
      ref::conv1x1_forward(x.data(), w.data(), b.data(), y.data(), d);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_conv1x1_backward(benchmark::State& state) {
  const k::ConvDims d = hidden_dims(state);
  const auto x = random_buffer(d.pixels() * d.cin, 1);
  const auto w = random_buffer(d.cin * d.cout, 2);
  const auto dy = random_buffer(d.pixels() * d.cout, 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(d.cout);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv1x1_backward_input(dy.data(), w.data(), dx.data(), d);
      k::conv1x1_backward_params(x.data(), dy.data(), dw.data(), db.data(), d);
    } else {
      ref::conv1x1_backward_input(dy.data(), w.data(), dx.data(), d);
      ref::conv1x1_backward_params(x.data(), dy.data(), dw.data(), db.data(),
                                   d);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

// Second pyramid level: 16 -> 32 channels.
template <bool Parallel>
void BM_conv3x3_forward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const k::ConvDims d{side, side, 16, 32};
  const auto x = random_buffer(d.pixels() * d.cin, 1);
  const auto w = random_buffer(9 * d.cin * d.cout, 2);
  const auto b = random_buffer(d.cout, 3);
  std::vector<float> y(d.pixels() * d.cout);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv3x3_forward(x.data(), w.data(), b.data(), y.data(), d);
    } else {
      ref::conv3x3_forward(x.data(), w.data(), b.data(), y.data(), d);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_conv3x3_backward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const k::ConvDims d{side, side, 16, 32};
  const auto x = random_buffer(d.pixels() * d.cin, 1);
  const auto w = random_buffer(9 * d.cin * d.cout, 2);
  const auto dy = random_buffer(d.pixels() * d.cout, 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(d.cout);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv3x3_backward_input(dy.data(), w.data(), dx.data(), d);
      k::conv3x3_backward_params(x.data(), dy.data(), dw.data(), db.data(), d);
    } else {
      ref::conv3x3_backward_input(dy.data(), w.data(), dx.data(), d);
      ref::conv3x3_backward_params(x.data(), dy.data(), dw.data(), db.data(),
                                   d);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

// Gram matrix of a [P, 64] activation: A^T A.
template <bool Parallel>
void BM_gram_matmul(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 64;
  const auto a = random_buffer(p * c, 1);
  std::vector<float> out(c * c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::matmul_accumulate(a.data(), a.data(), out.data(), c, p, c, true,
                           false);
    } else {
      ref::matmul_accumulate(a.data(), a.data(), out.data(), c, p, c, true,
                             false);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_maxpool(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const k::PoolDims d{side, side, 32};
  const auto x = random_buffer(side * side * d.channels, 1);
  std::vector<float> y(d.out_height() * d.out_width() * d.channels);
  std::vector<std::size_t> arg(y.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::maxpool2x2_forward(x.data(), y.data(), arg.data(), d);
    } else {
      ref::maxpool2x2_forward(x.data(), y.data(), arg.data(), d);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_conv1x1_forward<true>)->Name("conv1x1_forward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_conv1x1_forward<false>)->Name("conv1x1_forward/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_conv1x1_backward<true>)->Name("conv1x1_backward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_conv1x1_backward<false>)->Name("conv1x1_backward/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_conv3x3_forward<true>)->Name("conv3x3_forward/parallel")->Arg(64)->Arg(128);
BENCHMARK(BM_conv3x3_forward<false>)->Name("conv3x3_forward/reference")->Arg(64)->Arg(128);
BENCHMARK(BM_conv3x3_backward<true>)->Name("conv3x3_backward/parallel")->Arg(64)->Arg(128);
BENCHMARK(BM_conv3x3_backward<false>)->Name("conv3x3_backward/reference")->Arg(64)->Arg(128);
BENCHMARK(BM_gram_matmul<true>)->Name("gram_matmul/parallel")->Arg(4096)->Arg(16384);
BENCHMARK(BM_gram_matmul<false>)->Name("gram_matmul/reference")->Arg(4096)->Arg(16384);
BENCHMARK(BM_maxpool<true>)->Name("maxpool2x2/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_maxpool<false>)->Name("maxpool2x2/reference")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
