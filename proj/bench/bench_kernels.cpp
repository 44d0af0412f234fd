// Serial reference kernels against their OpenMP counterparts at the sizes the
// HAR encoder and the label-spreading graph use.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "glada/kernels.hpp"

using namespace glada;
namespace k = glada::kernels;

namespace {

std::vector<Real> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> g;
  std::vector<Real> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Conv layer 2 of the HAR encoder: weights [128][64*8] times im2col columns.
template <auto Gemm>
void bm_gemm(benchmark::State& state) {
  const std::size_t m = 128, kk = 64 * 8, n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(m * kk, 1), b = random_vector(kk * n, 2);
  std::vector<Real> c(m * n);
  for (auto _ : state) {
    Gemm(m, n, kk, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * m * n * kk));
}

template <auto Im2col>
void bm_im2col(benchmark::State& state) {
  k::ConvGeometry g{64, static_cast<std::size_t>(state.range(0)), 64, 8, 1, 4};
  const auto x = random_vector(g.channels * g.batch * g.length, 3);
  std::vector<Real> cols(g.col_rows() * g.col_cols());
  for (auto _ : state) {
    Im2col(g, x, cols);
    benchmark::DoNotOptimize(cols.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(cols.size() * sizeof(Real)));
}

template <auto Pairwise>
void bm_pairwise(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), dim = 128;
  const auto x = random_vector(n * dim, 4);
  std::vector<Real> d(n * n);
  for (auto _ : state) {
    Pairwise(n, dim, x, d);
    benchmark::DoNotOptimize(d.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n));
}

}  // namespace

BENCHMARK(bm_gemm<k::serial::gemm>)->Name("gemm/serial")->Arg(32 * 33)->Arg(128 * 33);
BENCHMARK(bm_gemm<k::parallel::gemm>)->Name("gemm/parallel")->Arg(32 * 33)->Arg(128 * 33);
BENCHMARK(bm_im2col<k::serial::im2col>)->Name("im2col/serial")->Arg(32)->Arg(128);
BENCHMARK(bm_im2col<k::parallel::im2col>)->Name("im2col/parallel")->Arg(32)->Arg(128);
BENCHMARK(bm_pairwise<k::serial::pairwise_sq_distances>)->Name("pairwise/serial")->Arg(500)->Arg(2000);
BENCHMARK(bm_pairwise<k::parallel::pairwise_sq_distances>)->Name("pairwise/parallel")->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
