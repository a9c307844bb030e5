#include <benchmark/benchmark.h>

#include "cardioprop/preprocess.hpp"
#include "cardioprop/random.hpp"

using namespace cardioprop;

static void BM_PreprocessSlice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  Image im(n, n);
  for (auto& v : im.px) v = static_cast<float>(rng.uniform(0, 1000));
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_roi_input(im));
}
BENCHMARK(BM_PreprocessSlice)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_SegInput(benchmark::State& state) {
  Rng rng(6);
  Image im(96, 96);
  for (auto& v : im.px) v = static_cast<float>(rng.uniform(0, 1000));
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_seg_input(im, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_SegInput)->Arg(64)->Arg(192)->Unit(benchmark::kMicrosecond);
