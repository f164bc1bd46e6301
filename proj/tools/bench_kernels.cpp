// Compares the OpenMP kernels against their serial references at sizes the
// recognizer actually uses (encoder stem / mid stage, reconstruction deconv,
// attention matmul).

#include <benchmark/benchmark.h>

#include <vector>

#include "ostr/kernels.hpp"
#include "ostr/rng.hpp"

using namespace ostr::kernels;

namespace {

std::vector<double> random_vec(int n, unsigned seed) {
  ostr::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

const Conv2dDims kConv{8, 24, 8, 32, 24, 3, 1, 1};
const Deconv2dDims kDeconv{8, 16, 8, 8, 8};
constexpr int kM = 16, kK = 128, kN = 128;

void BM_conv2d_ref(benchmark::State& state) {
  auto x = random_vec(kConv.n * kConv.cin * kConv.h * kConv.w, 1);
  auto w = random_vec(kConv.cout * kConv.cin * kConv.k * kConv.k, 2);
  auto b = random_vec(kConv.cout, 3);
  std::vector<double> y(
      static_cast<std::size_t>(kConv.n) * kConv.cout * kConv.out_h() * kConv.out_w());
  for (auto _ : state) {
    ref_conv2d_forward(x.data(), w.data(), b.data(), y.data(), kConv);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_conv2d_omp(benchmark::State& state) {
  set_threads(static_cast<int>(state.range(0)));
  auto x = random_vec(kConv.n * kConv.cin * kConv.h * kConv.w, 1);
  auto w = random_vec(kConv.cout * kConv.cin * kConv.k * kConv.k, 2);
  auto b = random_vec(kConv.cout, 3);
  std::vector<double> y(
      static_cast<std::size_t>(kConv.n) * kConv.cout * kConv.out_h() * kConv.out_w());
  for (auto _ : state) {
    conv2d_forward(x.data(), w.data(), b.data(), y.data(), kConv);
    benchmark::DoNotOptimize(y.data());
  }
  set_threads(1);
}

void BM_deconv2d_ref(benchmark::State& state) {
  auto x = random_vec(kDeconv.n * kDeconv.cin * kDeconv.h * kDeconv.w, 4);
  auto w = random_vec(kDeconv.cin * kDeconv.cout * kDeconv.k * kDeconv.k, 5);
  auto b = random_vec(kDeconv.cout, 6);
  std::vector<double> y(static_cast<std::size_t>(kDeconv.n) * kDeconv.cout *
                        kDeconv.out_h() * kDeconv.out_w());
  for (auto _ : state) {
    ref_deconv2d_forward(x.data(), w.data(), b.data(), y.data(), kDeconv);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_deconv2d_omp(benchmark::State& state) {
  set_threads(static_cast<int>(state.range(0)));
  auto x = random_vec(kDeconv.n * kDeconv.cin * kDeconv.h * kDeconv.w, 4);
  auto w = random_vec(kDeconv.cin * kDeconv.cout * kDeconv.k * kDeconv.k, 5);
  auto b = random_vec(kDeconv.cout, 6);
  std::vector<double> y(static_cast<std::size_t>(kDeconv.n) * kDeconv.cout *
                        kDeconv.out_h() * kDeconv.out_w());
  for (auto _ : state) {
    deconv2d_forward(x.data(), w.data(), b.data(), y.data(), kDeconv);
    benchmark::DoNotOptimize(y.data());
  }
  set_threads(1);
}

void BM_matmul_ref(benchmark::State& state) {
  auto a = random_vec(kM * kK, 7);
  auto b = random_vec(kK * kN, 8);
  std::vector<double> c(kM * kN);
  for (auto _ : state) {
    ref_matmul(a.data(), b.data(), c.data(), kM, kK, kN, false, false, false);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_matmul_omp(benchmark::State& state) {
  set_threads(static_cast<int>(state.range(0)));
  auto a = random_vec(kM * kK, 7);
  auto b = random_vec(kK * kN, 8);
  std::vector<double> c(kM * kN);
  for (auto _ : state) {
    matmul(a.data(), b.data(), c.data(), kM, kK, kN, false, false, false);
    benchmark::DoNotOptimize(c.data());
  }
  set_threads(1);
}

}  // namespace

BENCHMARK(BM_conv2d_ref);
BENCHMARK(BM_conv2d_omp)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_deconv2d_ref);
BENCHMARK(BM_deconv2d_omp)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_matmul_ref);
BENCHMARK(BM_matmul_omp)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
