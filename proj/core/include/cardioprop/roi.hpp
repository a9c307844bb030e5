#pragma once

#include "cardioprop/network.hpp"
#include "cardioprop/preprocess.hpp"
#include "cardioprop/stack.hpp"

namespace cardioprop {

/// Square crop window.
struct RoiBox {
  int row = 0;
  int col = 0;
  int side = 1;

  bool operator==(const RoiBox&) const = default;
};

struct RoiConfig {
  double range_low = 0.2;    // fraction of N; 0.1/0.5 suits stacks without above-base slices
  double range_high = 0.6;
  double threshold = 0.5;
  double pad_fraction = 0.3; // per side, relative to the covering square
  PreprocessConfig preprocess;
  int batch_size = 8;
};

/// Minimal square covering rows [r0, r1) x cols [c0, c1), padded by
/// max(1, round(pad_fraction * side)) on every side, then moved inside the
/// image; it is shrunk only when the image is smaller than the box.
RoiBox roi_box_from_bounds(int r0, int c0, int r1, int c1, int rows, int cols, double pad_fraction = 0.3);
/// Same from a binary union mask; throws Error("no-roi") when it is empty.
RoiBox roi_box_from_mask(const Raster<std::uint8_t>& union_mask, double pad_fraction = 0.3);

/// Thresholded heart masks (largest component kept) for each slice, at the
/// slice's own resolution.
std::vector<Raster<std::uint8_t>> predict_heart(Network& roi_net, std::span<const Image> slices,
                                                const RoiConfig& config = {});

/// ROI from the ED stack: heart predictions over S[lo N, hi N], union, box.
/// Throws Error("no-roi") when nothing is detected.
RoiBox determine_roi(const CardiacStack& ed_stack, Network& roi_net, const RoiConfig& config = {});

/// Same box computed from ground-truth heart masks instead of predictions.
RoiBox roi_from_masks(const CardiacStack& ed_stack, const RoiConfig& config = {});

template <class T>
Raster<T> crop_raster(const Raster<T>& in, const RoiBox& box) {
  Raster<T> out(box.side, box.side);
  for (int r = 0; r < box.side; ++r)
    for (int c = 0; c < box.side; ++c) out(r, c) = in(box.row + r, box.col + c);
  return out;
}

/// Pastes a cropped raster back into a rows x cols canvas filled with T{}.
template <class T>
Raster<T> uncrop_raster(const Raster<T>& in, const RoiBox& box, int rows, int cols) {
  Raster<T> out(rows, cols, T{});
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) out(box.row + r, box.col + c) = in(r, c);
  return out;
}

/// Crops every slice and mask; throws Error("usage") if the box leaves the image.
CardiacStack crop(const CardiacStack& stack, const RoiBox& box);

}  // namespace cardioprop
