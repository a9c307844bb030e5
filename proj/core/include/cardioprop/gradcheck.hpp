#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cardioprop {

struct GradCheckCase {
  std::string what;        // layer kind or loss name plus the shape used
  double max_relative_error = 0.0;
  std::size_t entries = 0; // gradient entries compared
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst() const;
};

/// Central-difference check of every layer kind and all three Dice losses on
/// randomly sized small inputs. `shapes` random shapes are drawn per layer
/// kind; each loss is checked on the same number of shapes.
GradCheckReport run_gradient_check(std::uint64_t seed, int shapes = 2, double step = 1e-6);

}  // namespace cardioprop
