#include "cardioprop/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cardioprop/losses.hpp"
#include "cardioprop/network.hpp"
#include "cardioprop/random.hpp"

namespace cardioprop {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& c : cases) w = std::max(w, c.max_relative_error);
  return w;
}

namespace {

constexpr std::size_t kMaxEntries = 300;

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

LayerSpec make_layer(std::string name, LayerKind kind, std::vector<std::string> inputs, int in, int out, int k = 3) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = kind;
  l.inputs = std::move(inputs);
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = kind == LayerKind::conv1x1_head ? 1 : k;
  return l;
}

// Parametric kinds are tested directly; the rest sit behind a 3x3 conv so the
// check flows through them into trainable weights. Inputs are checked too.
NetworkSpec probe_graph(LayerKind kind, int C, int H, int W, int k) {
  NetworkSpec s;
  s.inputs = {{"x", C, H, W}};
  if (kind == LayerKind::conv2d || kind == LayerKind::conv1x1_head) {
    s.layers = {make_layer("l", kind, {"x"}, C, C + 1, k)};
  } else if (kind == LayerKind::batchnorm) {
    s.layers = {make_layer("l", kind, {"x"}, C, C)};
  } else {
    s.layers = {make_layer("pre", LayerKind::conv2d, {"x"}, C, C)};
    std::vector<std::string> ins{"pre"};
    int in = C;
    if (kind == LayerKind::concat || kind == LayerKind::add) {
      s.layers.push_back(make_layer("pre2", LayerKind::conv2d, {"x"}, C, C));
      ins.push_back("pre2");
      if (kind == LayerKind::concat) in = 2 * C;
    }
    s.layers.push_back(make_layer("l", kind, ins, in, in));
  }
  s.outputs = {"l"};
  return s;
}

std::string shape_text(int n, int c, int h, int w) {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

GradCheckCase check_layer(LayerKind kind, Rng& rng, double step) {
  const int C = 1 + static_cast<int>(rng.below(3));
  const int H = 2 * (1 + static_cast<int>(rng.below(3)));
  const int W = 2 * (1 + static_cast<int>(rng.below(3)));
  const int N = 1 + static_cast<int>(rng.below(2));
  const int k = rng.bernoulli(0.5) ? 3 : 1;
  const NetworkSpec spec = probe_graph(kind, C, H, W, k);
  Network net(spec, rng.next());
  for (auto& p : net.params().items())
    if (p.trainable)
      for (double& v : p.value.values()) v = rng.uniform(-1, 1);
  Tensor x({N, C, H, W});
  for (double& v : x.values()) v = rng.uniform(-1, 1);

  // Scalar probe: random weighted sum of the output.
  const Tensor y0 = net.forward({{"x", x}}, Mode::train).at("l");
  std::vector<double> weights(y0.size());
  for (double& w : weights) w = rng.uniform(-1, 1);
  auto objective = [&] {
    const Tensor y = net.forward({{"x", x}}, Mode::train).at("l");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
    return s;
  };
  net.forward({{"x", x}}, Mode::train);
  net.zero_grad();
  net.backward({{"l", Tensor(y0.shape(), weights)}});

  GradCheckCase result{std::string(to_string(kind)) + " " + shape_text(N, C, H, W), 0.0, 0};
  auto fd = [&](double& slot) {
    const double keep = slot;
    slot = keep + step;
    const double up = objective();
    slot = keep - step;
    const double down = objective();
    slot = keep;
    return (up - down) / (2 * step);
  };
  for (auto& p : net.params().items()) {
    if (!p.trainable) continue;
    const Buffer analytic = p.value.grad();
    for (std::size_t i = 0; i < p.value.size() && result.entries < kMaxEntries; ++i, ++result.entries)
      result.max_relative_error = std::max(result.max_relative_error, rel_error(analytic[i], fd(p.value[i])));
  }
  return result;
}

GradCheckCase check_loss(int classes, Rng& rng, double step) {
  const int N = 1 + static_cast<int>(rng.below(2));
  const int C = std::max(classes, 1);
  const int H = 1 + static_cast<int>(rng.below(5)), W = 1 + static_cast<int>(rng.below(5));
  Tensor p({N, C, H, W}), g({N, C, H, W}, 0.0);
  for (double& v : p.values()) v = rng.uniform(0.01, 0.99);
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (classes == 1) g.at(n, 0, y, x) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        else g.at(n, static_cast<int>(rng.below(classes)), y, x) = 1.0;
      }
  auto value = [&] { return classes == 1 ? dice_loss_binary(p, g).value : dice_loss_multiclass(p, g, classes).value; };
  const auto grad = classes == 1 ? dice_loss_binary(p, g).grad : dice_loss_multiclass(p, g, classes).grad;
  const char* name = classes == 1 ? "DL1" : (classes == 4 ? "DL2" : "DL3");
  GradCheckCase result{std::string(name) + " " + shape_text(N, C, H, W), 0.0, 0};
  for (std::size_t i = 0; i < p.size(); ++i, ++result.entries) {
    const double keep = p[i];
    p[i] = keep + step;
    const double up = value();
    p[i] = keep - step;
    const double down = value();
    p[i] = keep;
    result.max_relative_error = std::max(result.max_relative_error, rel_error(grad[i], (up - down) / (2 * step)));
  }
  return result;
}

}  // namespace

GradCheckReport run_gradient_check(std::uint64_t seed, int shapes, double step) {
  Rng rng(seed);
  GradCheckReport report;
  for (int s = 0; s < shapes; ++s) {
    for (auto kind : {LayerKind::conv2d, LayerKind::batchnorm, LayerKind::leaky_relu, LayerKind::maxpool2,
                      LayerKind::upsample2, LayerKind::concat, LayerKind::add, LayerKind::conv1x1_head,
                      LayerKind::sigmoid, LayerKind::softmax})
      report.cases.push_back(check_layer(kind, rng, step));
    for (int classes : {1, 4, 3}) report.cases.push_back(check_loss(classes, rng, step));
  }
  return report;
}

}  // namespace cardioprop
