#include <benchmark/benchmark.h>

#include "cardioprop/losses.hpp"
#include "cardioprop/netbuilder.hpp"
#include "cardioprop/network.hpp"
#include "cardioprop/random.hpp"

using namespace cardioprop;

namespace {

TensorMap random_inputs(const NetworkSpec& spec, int batch, Rng& rng) {
  TensorMap in;
  for (const auto& slot : spec.inputs) {
    Tensor t({batch, slot.channels, slot.rows, slot.cols});
    for (double& v : t.values()) v = rng.uniform(-1, 1);
    in.emplace(slot.name, std::move(t));
  }
  return in;
}

NetworkSpec single_conv(int channels, int size) {
  NetworkSpec s;
  s.inputs = {{"x", channels, size, size}};
  LayerSpec l;
  l.name = "c";
  l.kind = LayerKind::conv2d;
  l.inputs = {"x"};
  l.in_channels = l.out_channels = channels;
  l.kernel = 3;
  s.layers = {l};
  s.outputs = {"c"};
  return s;
}

}  // namespace

// args: channels, spatial size
static void BM_Conv3x3Forward(benchmark::State& state) {
  const auto spec = single_conv(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Network net(spec, 1);
  Rng rng(2);
  const auto in = random_inputs(spec, 8, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(in, Mode::infer));
}
BENCHMARK(BM_Conv3x3Forward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMillisecond);

static void BM_Conv3x3ForwardBackward(benchmark::State& state) {
  const auto spec = single_conv(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Network net(spec, 1);
  Rng rng(2);
  const auto in = random_inputs(spec, 8, rng);
  for (auto _ : state) {
    auto out = net.forward(in, Mode::train);
    net.zero_grad();
    net.backward({{"c", Tensor(out.at("c").shape(), 1.0)}});
  }
}
BENCHMARK(BM_Conv3x3ForwardBackward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMillisecond);

// One training step of a width-0.5 network; arg: kind, input size
static void BM_TrainStep(benchmark::State& state) {
  const auto kind = static_cast<NetKind>(state.range(0));
  const auto spec = build({.kind = kind, .width_multiplier = 0.5, .input_size = static_cast<int>(state.range(1))});
  Network net(spec, 1);
  Rng rng(3);
  const auto in = random_inputs(spec, 16, rng);
  for (auto _ : state) {
    const auto out = net.forward(in, Mode::train);
    const Tensor& p = out.at(kProbabilityOutput);
    Tensor g(p.shape());
    const auto loss = spec.num_classes == 1 ? dice_loss_binary(p, g) : dice_loss_multiclass(p, g, spec.num_classes);
    net.zero_grad();
    net.backward({{kProbabilityOutput, Tensor(p.shape(), loss.grad)}});
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_TrainStep)
    ->Args({static_cast<int>(NetKind::roi), 128})
    ->Args({static_cast<int>(NetKind::lvrv), 64})
    ->Unit(benchmark::kMillisecond);
