// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ardhoi/kernels.hpp"

namespace k = ardhoi::kernels;

namespace {

std::vector<float> random_buffer(std::size_t n, unsigned seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

using Gemm = void (*)(int, int, int, const float*, const float*, float*, bool);

template <Gemm fn>
void bm_gemm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_buffer(static_cast<std::size_t>(n) * n, 1);
  const auto b = random_buffer(static_cast<std::size_t>(n) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    fn(n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

using Scan = void (*)(int, int, const float*, const float*, float*, std::span<const int>);

template <Scan fn>
void bm_scan(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0)), ch = 256;
  const auto a = random_buffer(static_cast<std::size_t>(len) * ch, 3, 0.5f, 1.0f);
  const auto b = random_buffer(static_cast<std::size_t>(len) * ch, 4);
  std::vector<float> h(a.size());
  const std::vector<int> resets{0};
  for (auto _ : state) {
    fn(len, ch, a.data(), b.data(), h.data(), resets);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * len * ch);
}

template <Scan fn>
void bm_scan_adjoint(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0)), ch = 256;
  const auto a = random_buffer(static_cast<std::size_t>(len) * ch, 5, 0.5f, 1.0f);
  const auto g = random_buffer(static_cast<std::size_t>(len) * ch, 6);
  std::vector<float> lambda(a.size());
  const std::vector<int> resets{0};
  for (auto _ : state) {
    fn(len, ch, a.data(), g.data(), lambda.data(), resets);
    benchmark::DoNotOptimize(lambda.data());
  }
  state.SetItemsProcessed(state.iterations() * len * ch);
}

using Norm = void (*)(int, int, const float*, float, float*, float*);

template <Norm fn>
void bm_layernorm(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = 512;
  const auto x = random_buffer(static_cast<std::size_t>(rows) * cols, 7);
  std::vector<float> y(x.size()), rstd(static_cast<std::size_t>(rows));
  for (auto _ : state) {
    fn(rows, cols, x.data(), 1e-5f, y.data(), rstd.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * cols);
}

}  // namespace

BENCHMARK(bm_gemm<k::gemm_nn>)->Name("gemm_nn/parallel")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<k::reference::gemm_nn>)->Name("gemm_nn/reference")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<k::gemm_nt>)->Name("gemm_nt/parallel")->Arg(256);
BENCHMARK(bm_gemm<k::reference::gemm_nt>)->Name("gemm_nt/reference")->Arg(256);
BENCHMARK(bm_gemm<k::gemm_tn>)->Name("gemm_tn/parallel")->Arg(256);
BENCHMARK(bm_gemm<k::reference::gemm_tn>)->Name("gemm_tn/reference")->Arg(256);
BENCHMARK(bm_scan<k::linear_scan>)->Name("linear_scan/parallel")->Arg(64)->Arg(1024);
BENCHMARK(bm_scan<k::reference::linear_scan>)->Name("linear_scan/reference")->Arg(64)->Arg(1024);
BENCHMARK(bm_scan_adjoint<k::linear_scan_adjoint>)->Name("linear_scan_adjoint/parallel")->Arg(1024);
BENCHMARK(bm_scan_adjoint<k::reference::linear_scan_adjoint>)->Name("linear_scan_adjoint/reference")->Arg(1024);
BENCHMARK(bm_layernorm<k::layernorm_rows>)->Name("layernorm/parallel")->Arg(1024);
BENCHMARK(bm_layernorm<k::reference::layernorm_rows>)->Name("layernorm/reference")->Arg(1024);

BENCHMARK_MAIN();
