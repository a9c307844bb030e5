#pragma once

#include <cstdint>
#include <vector>

#include "cardioprop/network.hpp"

namespace cardioprop {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators, one vector per trainable parameter (in ParameterSet order).
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

AdamState make_adam_state(const ParameterSet& params, AdamConfig config = {});

/// One bias-corrected Adam update of every trainable parameter from its grad
/// slot. Throws Error("nonfinite") naming the first parameter whose gradient is
/// not finite; nothing is modified in that case.
void adam_step(AdamState& state, ParameterSet& params);

}  // namespace cardioprop
