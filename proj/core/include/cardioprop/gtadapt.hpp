#pragma once

#include "cardioprop/stack.hpp"

namespace cardioprop {

struct BasalDetectionParams {
  double overlap_threshold = 0.75;  // overlap(RVC_i, RVC_{i+1}) / |RVC_{i+1}|
  double area_threshold = 0.8;      // |RVC_i| / |RVC_{i+1}|
};

/// True when the LV cavity touches background or the RV cavity.
bool lv_cavity_open(const LabelMask& mask);

/// True when the RV cavity on `slice` has shrunk substantially relative to
/// `below`. Never fires when `below` has no RVC.
bool rv_cavity_shrinks(const LabelMask& slice, const LabelMask& below, const BasalDetectionParams& params);

/// Scans from the apex (last slice) towards the base and returns the first
/// slice that is open or shows RV shrinkage; -1 when no slice qualifies.
int detect_basal_slice(const CardiacStack& stack, const BasalDetectionParams& params = {});

/// Blanks every slice above `base`, strips RVC from slice `base`, keeps the
/// rest. base == -1 leaves the masks untouched.
CardiacStack adapt_ground_truth(const CardiacStack& stack, int base);

}  // namespace cardioprop
