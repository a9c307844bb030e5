#include "cardioprop/netbuilder.hpp"

#include <cmath>
#include <string>

#include "cardioprop/error.hpp"

namespace cardioprop {

namespace {

struct Node {
  std::string name;
  int channels;
};

class GraphBuilder {
 public:
  explicit GraphBuilder(NetworkSpec& spec) : spec_(spec) {}

  Node conv_unit(const std::string& prefix, const Node& in, int out) {
    add({prefix + ".conv", LayerKind::conv2d, {in.name}, in.channels, out, 3});
    LayerSpec bn{prefix + ".bn", LayerKind::batchnorm, {prefix + ".conv"}, out, out, 1};
    add(bn);
    add({prefix + ".act", LayerKind::leaky_relu, {prefix + ".bn"}, out, out, 1});
    return {prefix + ".act", out};
  }

  Node block(const std::string& prefix, const Node& in, int out) {
    return conv_unit(prefix + ".b", conv_unit(prefix + ".a", in, out), out);
  }

  Node unary(const std::string& name, LayerKind kind, const Node& in) {
    add({name, kind, {in.name}, in.channels, in.channels, 1});
    return {name, in.channels};
  }

  Node concat(const std::string& name, const Node& a, const Node& b) {
    add({name, LayerKind::concat, {a.name, b.name}, a.channels + b.channels, a.channels + b.channels, 1});
    return {name, a.channels + b.channels};
  }

  Node head(const std::string& name, const Node& in, int classes) {
    add({name, LayerKind::conv1x1_head, {in.name}, in.channels, classes, 1});
    return {name, classes};
  }

  Node add_nodes(const std::string& name, const std::vector<Node>& ins) {
    std::vector<std::string> names;
    for (const auto& n : ins) names.push_back(n.name);
    add({name, LayerKind::add, names, ins[0].channels, ins[0].channels, 1});
    return {name, ins[0].channels};
  }

  // Encoder stages; returns per-stage skip outputs and the bottleneck.
  std::pair<std::vector<Node>, Node> encoder(const std::string& prefix, Node x, int depth, int base) {
    std::vector<Node> skips;
    for (int s = 0; s < depth; ++s) {
      x = block(prefix + std::to_string(s), x, base << s);
      skips.push_back(x);
      x = unary(prefix + std::to_string(s) + ".pool", LayerKind::maxpool2, x);
    }
    return {skips, block(prefix + "bottom", x, base << depth)};
  }

 private:
  void add(LayerSpec l) {
    if (l.kind == LayerKind::batchnorm) {
      l.epsilon = 1e-5;
      l.momentum = 0.99;
    }
    spec_.layers.push_back(std::move(l));
  }
  NetworkSpec& spec_;
};

}  // namespace

int class_count(NetKind kind) {
  switch (kind) {
    case NetKind::roi: return 1;
    case NetKind::lv: return 3;
    default: return 4;
  }
}

int context_channels(NetKind kind) { return uses_context(kind) ? 1 + class_count(kind) : 0; }

NetworkSpec build(const BuildOptions& options) {
  if (!(options.width_multiplier > 0.0)) throw Error("usage", "width multiplier must be positive");
  if (options.depth < 2) throw Error("usage", "depth must be at least 2 (heads at 1/4 and 1/2 resolution)");
  const int size = options.input_size > 0 ? options.input_size
                                          : (options.kind == NetKind::roi ? 128 : 192);
  if (size % (1 << options.depth))
    throw Error("usage", "input size " + std::to_string(size) + " not divisible by 2^depth");

  NetworkSpec spec;
  spec.kind = options.kind;
  spec.num_classes = class_count(options.kind);
  spec.width_multiplier = options.width_multiplier;
  spec.depth = options.depth;
  spec.base_channels = std::max(1, static_cast<int>(std::lround(options.base_width * options.width_multiplier)));
  const int base = spec.base_channels;
  const int depth = options.depth;

  spec.inputs.push_back({kImageInput, 1, size, size});
  if (uses_context(options.kind)) spec.inputs.push_back({kContextInput, context_channels(options.kind), size, size});

  GraphBuilder g(spec);
  auto [skips, bottom] = g.encoder("enc", {kImageInput, 1}, depth, base);
  if (uses_context(options.kind)) {
    auto [ctx_skips, ctx_bottom] = g.encoder("ctx", {kContextInput, context_channels(options.kind)}, depth, base);
    (void)ctx_skips;
    bottom = g.conv_unit("fuse", g.concat("fuse.cat", bottom, ctx_bottom), base << depth);
  }

  // Decoder; stage s runs at resolution size / 2^s.
  const int classes = spec.num_classes;
  std::vector<Node> head_logits;
  Node x = bottom;
  if (depth == 2) head_logits.push_back(g.head("head.s2", x, classes));
  for (int s = depth - 1; s >= 0; --s) {
    const std::string p = "dec" + std::to_string(s);
    x = g.unary(p + ".up", LayerKind::upsample2, x);
    x = g.conv_unit(p + ".upconv", x, base << s);
    x = g.block(p, g.concat(p + ".cat", skips[s], x), base << s);
    if (s == 2 || s == 1) head_logits.push_back(g.head("head.s" + std::to_string(s), x, classes));
  }
  Node logits = g.head("head.s0", x, classes);

  // Upsample the coarse heads to full size and sum with the final logits.
  std::vector<Node> terms{logits};
  for (auto h : head_logits) {
    const int scale = std::stoi(h.name.substr(h.name.size() - 1));
    for (int k = 0; k < scale; ++k) h = g.unary(h.name + ".up" + std::to_string(k), LayerKind::upsample2, h);
    terms.push_back(h);
  }
  const Node sum = g.add_nodes("logits", terms);
  g.unary(kProbabilityOutput, classes == 1 ? LayerKind::sigmoid : LayerKind::softmax, sum);
  spec.outputs = {kProbabilityOutput};

  infer_shapes(spec);
  return spec;
}

}  // namespace cardioprop
