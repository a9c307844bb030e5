#pragma once

#include "cardioprop/network_spec.hpp"

namespace cardioprop {

struct BuildOptions {
  NetKind kind = NetKind::roi;
  double width_multiplier = 1.0;
  int input_size = 0;     // 0 selects 128 for ROI-net, 192 otherwise
  int depth = 4;          // number of 2x2 pooling stages
  int base_width = 16;    // channels of the first stage at width 1.0
};

/// Input slot names.
inline constexpr const char* kImageInput = "image";
inline constexpr const char* kContextInput = "context";
/// Output node carrying per-pixel probabilities.
inline constexpr const char* kProbabilityOutput = "probabilities";

/// Context channels: previous image plus one-hot of the previous mask.
int context_channels(NetKind kind);
int class_count(NetKind kind);

/// U-net style encoder/decoder (two conv+BN+LReLU units per stage, max-pool
/// down, nearest x2 up followed by a conv unit, skip concatenation). Logit
/// heads at 1/4 and 1/2 resolution are upsampled and added to the full
/// resolution logits before the sigmoid/softmax. Propagation kinds get a
/// second encoder for the context whose bottleneck is concatenated with the
/// main one and fused by one conv unit.
NetworkSpec build(const BuildOptions& options);
inline NetworkSpec build(NetKind kind, double width_multiplier) {
  return build(BuildOptions{.kind = kind, .width_multiplier = width_multiplier});
}

}  // namespace cardioprop
