#include "cardioprop/gtadapt.hpp"

#include <algorithm>
#include <string>

#include "cardioprop/error.hpp"

namespace cardioprop {

bool lv_cavity_open(const LabelMask& mask) {
  return edge_count(mask, {LVC, BG}) + edge_count(mask, {LVC, RVC}) > 0;
}

bool rv_cavity_shrinks(const LabelMask& slice, const LabelMask& below, const BasalDetectionParams& params) {
  std::int64_t area = 0, area_below = 0, overlap = 0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const bool a = slice.px[i] == RVC, b = below.px[i] == RVC;
    area += a;
    area_below += b;
    overlap += a && b;
  }
  if (area_below == 0) return false;
  const double denom = static_cast<double>(area_below);
  return static_cast<double>(overlap) / denom <= params.overlap_threshold &&
         static_cast<double>(area) / denom <= params.area_threshold;
}

int detect_basal_slice(const CardiacStack& stack, const BasalDetectionParams& params) {
  if (!stack.has_masks() || stack.masks.size() != stack.slices.size())
    throw Error("usage", "basal-slice detection needs a mask on every slice");
  for (int i = stack.size() - 1; i >= 0; --i) {
    if (lv_cavity_open(stack.masks[i])) return i;
    if (i + 1 < stack.size() && rv_cavity_shrinks(stack.masks[i], stack.masks[i + 1], params)) return i;
  }
  return -1;
}

CardiacStack adapt_ground_truth(const CardiacStack& stack, int base) {
  if (base < -1 || base >= stack.size())
    throw Error("usage", "base index " + std::to_string(base) + " outside [-1, N-1]");
  CardiacStack out = stack;
  if (!out.has_masks() || base < 0) return out;
  for (int i = 0; i < base; ++i) std::fill(out.masks[i].px.begin(), out.masks[i].px.end(), BG);
  for (auto& v : out.masks[base].px)
    if (v == RVC) v = BG;
  return out;
}

}  // namespace cardioprop
