// Serial reference kernels against their OpenMP counterparts, at the shapes
// the decoder produces (queries × pixels × dim).

#include <benchmark/benchmark.h>

#include <vector>

#include "mpseg/kernels.hpp"
#include "mpseg/rng.hpp"

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  mpseg::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Parallel>
void BM_GemmNT(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const std::size_t k = 32;
  const auto a = filled(m * k, 1), b = filled(n * k, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      mpseg::kernels::gemm_nt(m, k, n, a, b, c, false);
    else
      mpseg::kernels::ref::gemm_nt(m, k, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * n * k));
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 32, n = 32;
  const auto a = filled(m * k, 3), b = filled(k * n, 4);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      mpseg::kernels::gemm_nn(m, k, n, a, b, c, false);
    else
      mpseg::kernels::ref::gemm_nn(m, k, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * n * k));
}

template <bool Parallel>
void BM_GemmTN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 32, n = 32;
  const auto a = filled(m * k, 5), b = filled(m * n, 6);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      mpseg::kernels::gemm_tn(m, k, n, a, b, c, false);
    else
      mpseg::kernels::ref::gemm_tn(m, k, n, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * n * k));
}

template <bool Parallel>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto x = filled(rows * cols, 7);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel)
      mpseg::kernels::softmax_rows(rows, cols, x, y);
    else
      mpseg::kernels::ref::softmax_rows(rows, cols, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Normalize(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 32;
  const auto x = filled(rows * cols, 8);
  std::vector<double> y(rows * cols), rstd(rows);
  for (auto _ : state) {
    if constexpr (Parallel)
      mpseg::kernels::normalize_rows(rows, cols, x, 1e-5, y, rstd);
    else
      mpseg::kernels::ref::normalize_rows(rows, cols, x, 1e-5, y, rstd);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_GemmNT<false>)->Args({40, 1024})->Args({40, 4096})->Args({256, 1024});
BENCHMARK(BM_GemmNT<true>)->Args({40, 1024})->Args({40, 4096})->Args({256, 1024});
BENCHMARK(BM_GemmNN<false>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_GemmNN<true>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_GemmTN<false>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_GemmTN<true>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_Softmax<false>)->Args({40, 1024})->Args({40, 4096});
BENCHMARK(BM_Softmax<true>)->Args({40, 1024})->Args({40, 4096});
BENCHMARK(BM_Normalize<false>)->Arg(1024)->Arg(4096);
BENCHMARK(BM_Normalize<true>)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
