#include "cardioprop/losses.hpp"

#include <string>

#include "cardioprop/error.hpp"

namespace cardioprop {

LossValue dice_loss_binary(std::span<const double> p, std::span<const double> g, const LossConfig& config) {
  if (p.size() != g.size())
    throw Error("shape", "dice loss: " + std::to_string(p.size()) + " probabilities vs " +
                             std::to_string(g.size()) + " targets");
  if (!(config.epsilon > 0)) throw Error("usage", "dice epsilon must be positive");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * g[i];
    sp += p[i];
    sg += g[i];
  }
  const double num = 2.0 * inter + config.epsilon;
  const double den = sp + sg + config.epsilon;
  LossValue out{-num / den, std::vector<double>(p.size())};
  for (std::size_t i = 0; i < p.size(); ++i) out.grad[i] = -(2.0 * g[i] * den - num) / (den * den);
  return out;
}

LossValue dice_loss_binary(const Tensor& p, const Tensor& g, const LossConfig& config) {
  if (p.shape() != g.shape() || p.rank() != 4 || p.dim(1) != 1)
    throw Error("shape", "binary dice loss: prediction " + shape_string(p.shape()) + " vs target " +
                             shape_string(g.shape()));
  const int N = p.dim(0);
  const std::size_t hw = p.size() / N;
  LossValue out{0.0, std::vector<double>(p.size(), 0.0)};
  // sum first, divide once: a perfect batch comes out at exactly -1
  double total = 0.0;
  for (int n = 0; n < N; ++n) {
    const auto one = dice_loss_binary(p.data().subspan(n * hw, hw), g.data().subspan(n * hw, hw), config);
    total += one.value;
    for (std::size_t i = 0; i < hw; ++i) out.grad[n * hw + i] = one.grad[i] / N;
  }
  out.value = total / N;
  return out;
}

LossValue dice_loss_multiclass(const Tensor& p, const Tensor& g, int classes, const LossConfig& config) {
  if (p.shape() != g.shape()) throw Error("shape", "dice loss: prediction " + shape_string(p.shape()) +
                                                       " vs target " + shape_string(g.shape()));
  if (p.rank() != 4 || classes <= 0 || classes > p.dim(1))
    throw Error("shape", "dice loss: " + std::to_string(classes) + " classes requested from " +
                             shape_string(p.shape()));
  if (!(config.epsilon > 0)) throw Error("usage", "dice epsilon must be positive");
  const int N = p.dim(0), C = p.dim(1);
  const std::size_t hw = static_cast<std::size_t>(p.dim(2)) * p.dim(3);
  LossValue out{0.0, std::vector<double>(p.size(), 0.0)};
  const double weight = 1.0 / (static_cast<double>(classes) * N);
  double ratios = 0.0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < classes; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      double inter = 0.0, sp = 0.0, sg = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        inter += p[off + i] * g[off + i];
        sp += p[off + i];
        sg += g[off + i];
      }
      const double num = 2.0 * inter + config.epsilon;
      const double den = sp + sg + config.epsilon;
      ratios += num / den;
      for (std::size_t i = 0; i < hw; ++i) out.grad[off + i] = -(2.0 * g[off + i] * den - num) / (den * den) * weight;
    }
  out.value = -ratios / (static_cast<double>(classes) * N);
  return out;
}

}  // namespace cardioprop
