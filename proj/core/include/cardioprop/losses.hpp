#pragma once

#include <span>
#include <vector>

#include "cardioprop/tensor.hpp"

namespace cardioprop {

struct LossConfig {
  double epsilon = 1.0;
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // d value / d probabilities, same layout as the input
};

/// Soft Dice loss for one binary image: -(2 sum pg + eps) / (sum p + sum g + eps).
LossValue dice_loss_binary(std::span<const double> p, std::span<const double> g, const LossConfig& config = {});
/// Batch mean of dice_loss_binary over the samples of single-channel NCHW tensors.
LossValue dice_loss_binary(const Tensor& p, const Tensor& g, const LossConfig& config = {});

/// Mean over the first `classes` channels of the per-class soft Dice terms,
/// negated, averaged over the batch. p and g are NCHW with at least `classes`
/// channels. classes == 4 gives the LVRV loss, classes == 3 the LV loss.
LossValue dice_loss_multiclass(const Tensor& p, const Tensor& g, int classes, const LossConfig& config = {});

}  // namespace cardioprop
