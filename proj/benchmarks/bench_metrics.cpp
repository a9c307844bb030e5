#include <cmath>

#include <benchmark/benchmark.h>

#include "cardioprop/metrics.hpp"
#include "cardioprop/random.hpp"

using namespace cardioprop;

namespace {

BinaryVolume disc_volume(int slices, int size, double radius, double shift) {
  BinaryVolume v;
  for (int z = 0; z < slices; ++z) {
    BinaryMask m(size, size, 0);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c)
        m(r, c) = std::hypot(r - size / 2.0 - shift, c - size / 2.0) < radius ? 1 : 0;
    v.push_back(std::move(m));
  }
  return v;
}

}  // namespace

// Boundary-based Hausdorff between two shifted disc stacks; arg: disc radius.
static void BM_VolumeHausdorff(benchmark::State& state) {
  const double r = static_cast<double>(state.range(0));
  const auto a = disc_volume(10, 256, r, 0), b = disc_volume(10, 256, r * 0.9, 3);
  const VoxelSpacing sp{1.5, 1.5, 10};
  for (auto _ : state) benchmark::DoNotOptimize(hausdorff(a, b, sp));
}
BENCHMARK(BM_VolumeHausdorff)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

static void BM_MannWhitney(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> a(state.range(0)), b(state.range(0));
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal() + 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(mann_whitney_u(a, b));
}
BENCHMARK(BM_MannWhitney)->Arg(8)->Arg(100)->Arg(1000);
