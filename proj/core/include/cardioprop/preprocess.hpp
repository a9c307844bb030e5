#pragma once

#include <cstdint>
#include <span>

#include "cardioprop/stack.hpp"

namespace cardioprop {

struct PreprocessConfig {
  int target_size = 128;
  double clahe_clip_limit = 3.0;
  int clahe_tiles = 8;
  double percentile_low = 5.0;
  double percentile_high = 95.0;

  void validate() const;
};

inline constexpr int kRoiInputSize = 128;
inline constexpr int kSegInputSize = 192;

/// Linear interpolation between closest ranks (numpy's default estimator).
double percentile(std::span<const float> values, double p);

Image clip_percentiles(const Image& image, double low = 5.0, double high = 95.0);

using GrayImage = Raster<std::uint8_t>;

/// Linear map of [min, max] onto the 256 integer bins; constant images map to 0.
GrayImage rescale_to_bins(const Image& image);

/// Contrast-limited adaptive histogram equalisation on 8-bit data: per-tile
/// clipped histograms (limit = clip * tile_area / 256, excess spread evenly),
/// bilinear blending of the tile mappings between tile centres. Sizes that are
/// not a multiple of the grid are reflect-padded for the histograms.
GrayImage clahe(const GrayImage& image, double clip_limit = 3.0, int tiles = 8);

/// Zero-pad to a centred square (odd remainder to the bottom/right), then
/// nearest-neighbour resample to target x target.
template <class T>
Raster<T> pad_resize(const Raster<T>& in, int target);

/// Inverse of pad_resize back to the original extent (nearest-neighbour).
template <class T>
Raster<T> unpad_resize(const Raster<T>& in, int rows, int cols);

struct Normalized {
  Image image;
  bool degenerate_std = false;  // std was zero; divided by 1 instead
};

/// Standardise with mean/std of the pixels inside [p_low, p_high].
Normalized normalize(const Image& image, double low = 5.0, double high = 95.0);

/// clip -> 8-bit rebin -> CLAHE -> pad/resize -> normalise.
Image preprocess_roi_input(const Image& image, const PreprocessConfig& config = {});
/// pad/resize -> normalise (no CLAHE).
Image preprocess_seg_input(const Image& image, int target_size, const PreprocessConfig& config = {});

// ---------------------------------------------------------------------------

namespace detail {
inline int nearest_source(int dst, int src_extent, int dst_extent) {
  const long long v = (2LL * dst + 1) * src_extent / (2LL * dst_extent);
  return static_cast<int>(v < src_extent ? v : src_extent - 1);
}
}  // namespace detail

template <class T>
Raster<T> pad_resize(const Raster<T>& in, int target) {
  const int side = in.rows > in.cols ? in.rows : in.cols;
  const int top = (side - in.rows) / 2;
  const int left = (side - in.cols) / 2;
  Raster<T> out(target, target, T{});
  for (int r = 0; r < target; ++r) {
    const int sr = detail::nearest_source(r, side, target) - top;
    if (sr < 0 || sr >= in.rows) continue;
    for (int c = 0; c < target; ++c) {
      const int sc = detail::nearest_source(c, side, target) - left;
      if (sc >= 0 && sc < in.cols) out(r, c) = in(sr, sc);
    }
  }
  return out;
}

template <class T>
Raster<T> unpad_resize(const Raster<T>& in, int rows, int cols) {
  const int side = rows > cols ? rows : cols;
  const int top = (side - rows) / 2;
  const int left = (side - cols) / 2;
  Raster<T> out(rows, cols, T{});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out(r, c) = in(detail::nearest_source(r + top, in.rows, side), detail::nearest_source(c + left, in.cols, side));
  return out;
}

}  // namespace cardioprop
