#pragma once

#include <cstdint>
#include <optional>

#include "cardioprop/random.hpp"
#include "cardioprop/stack.hpp"

namespace cardioprop {

struct AugmentConfig {
  bool enabled = true;
  double rotation_deg = 30.0;   // uniform in [-r, r]
  double shift_fraction = 0.1;  // of the extent, per axis
  double zoom_min = 0.9;        // independent per axis
  double zoom_max = 1.1;
  double flip_h_probability = 0.5;
  double flip_v_probability = 0.5;

  void validate() const;
};

/// One concrete transform. Flips are applied first, then rotation
/// (counter-clockwise on screen), zoom and shift about the raster centre.
struct AugmentDraw {
  double rotation_deg = 0.0;
  double zoom_row = 1.0;
  double zoom_col = 1.0;
  double shift_row = 0.0;  // pixels
  double shift_col = 0.0;
  bool flip_h = false;     // mirror columns
  bool flip_v = false;     // mirror rows
};

AugmentDraw draw_augmentation(const AugmentConfig& config, int rows, int cols, Rng& rng);

/// Bilinear resampling; samples falling outside the raster read as zero.
Image warp_image(const Image& image, const AugmentDraw& draw);
/// Nearest-neighbour resampling; outside reads as BG.
LabelMask warp_mask(const LabelMask& mask, const AugmentDraw& draw);

struct TrainingSample {
  Image image;
  std::optional<Image> context_image;      // nullopt = null image
  std::optional<LabelMask> context_mask;   // nullopt = null mask
  LabelMask target;
};

/// Same transform on every raster of the sample.
TrainingSample augment(const TrainingSample& sample, const AugmentDraw& draw);

}  // namespace cardioprop
