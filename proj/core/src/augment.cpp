#include "cardioprop/augment.hpp"

#include <cmath>
#include <numbers>

#include "cardioprop/error.hpp"

namespace cardioprop {

void AugmentConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(rotation_deg) || !finite(shift_fraction) || !finite(zoom_min) || !finite(zoom_max))
    throw Error("config", "augmentation ranges must be finite");
  if (rotation_deg < 0 || shift_fraction < 0) throw Error("config", "augmentation ranges must be non-negative");
  if (!(zoom_min > 0) || zoom_max < zoom_min) throw Error("config", "zoom range must satisfy 0 < min <= max");
  for (double p : {flip_h_probability, flip_v_probability})
    if (!(p >= 0 && p <= 1)) throw Error("config", "flip probabilities must lie in [0, 1]");
}

AugmentDraw draw_augmentation(const AugmentConfig& c, int rows, int cols, Rng& rng) {
  AugmentDraw d;
  // Draw every component even when disabled so the stream position does not
  // depend on the switch.
  d.rotation_deg = rng.uniform(-c.rotation_deg, c.rotation_deg);
  d.zoom_row = rng.uniform(c.zoom_min, c.zoom_max);
  d.zoom_col = rng.uniform(c.zoom_min, c.zoom_max);
  d.shift_row = rng.uniform(-c.shift_fraction, c.shift_fraction) * rows;
  d.shift_col = rng.uniform(-c.shift_fraction, c.shift_fraction) * cols;
  d.flip_h = rng.bernoulli(c.flip_h_probability);
  d.flip_v = rng.bernoulli(c.flip_v_probability);
  if (!c.enabled) d = AugmentDraw{};
  return d;
}

namespace {

// Maps an output pixel to its (fractional) source coordinate.
struct InverseMap {
  double cy, cx, cos_t, sin_t;
  AugmentDraw d;
  int rows, cols;

  InverseMap(const AugmentDraw& draw, int r, int c) : d(draw), rows(r), cols(c) {
    cy = (rows - 1) / 2.0;
    cx = (cols - 1) / 2.0;
    const double theta = draw.rotation_deg * std::numbers::pi / 180.0;
    cos_t = std::cos(theta);
    sin_t = std::sin(theta);
  }

  void operator()(int r, int c, double& sr, double& sc) const {
    const double uy = (r - cy - d.shift_row) / d.zoom_row;
    const double ux = (c - cx - d.shift_col) / d.zoom_col;
    // forward rotation: dy' = cos dy - sin dx, dx' = sin dy + cos dx
    sr = cos_t * uy + sin_t * ux + cy;
    sc = -sin_t * uy + cos_t * ux + cx;
    if (d.flip_v) sr = rows - 1 - sr;
    if (d.flip_h) sc = cols - 1 - sc;
  }
};

bool is_identity(const AugmentDraw& d) {
  return d.rotation_deg == 0 && d.zoom_row == 1 && d.zoom_col == 1 && d.shift_row == 0 && d.shift_col == 0 &&
         !d.flip_h && !d.flip_v;
}

}  // namespace

Image warp_image(const Image& image, const AugmentDraw& draw) {
  if (is_identity(draw)) return image;
  const InverseMap map(draw, image.rows, image.cols);
  Image out(image.rows, image.cols, 0.0f);
  auto at = [&](int r, int c) -> double { return image.inside(r, c) ? image(r, c) : 0.0; };
  for (int r = 0; r < image.rows; ++r)
    for (int c = 0; c < image.cols; ++c) {
      double sr, sc;
      map(r, c, sr, sc);
      if (sr <= -1 || sc <= -1 || sr >= image.rows || sc >= image.cols) continue;
      const int r0 = static_cast<int>(std::floor(sr)), c0 = static_cast<int>(std::floor(sc));
      const double fr = sr - r0, fc = sc - c0;
      const double v = (1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)) +
                       fr * ((1 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
      out(r, c) = static_cast<float>(v);
    }
  return out;
}

LabelMask warp_mask(const LabelMask& mask, const AugmentDraw& draw) {
  if (is_identity(draw)) return mask;
  const InverseMap map(draw, mask.rows, mask.cols);
  LabelMask out(mask.rows, mask.cols, BG);
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) {
      double sr, sc;
      map(r, c, sr, sc);
      const int ir = static_cast<int>(std::lround(sr)), ic = static_cast<int>(std::lround(sc));
      if (mask.inside(ir, ic)) out(r, c) = mask(ir, ic);
    }
  return out;
}

TrainingSample augment(const TrainingSample& s, const AugmentDraw& draw) {
  TrainingSample out;
  out.image = warp_image(s.image, draw);
  if (s.context_image) out.context_image = warp_image(*s.context_image, draw);
  if (s.context_mask) out.context_mask = warp_mask(*s.context_mask, draw);
  out.target = warp_mask(s.target, draw);
  return out;
}

}  // namespace cardioprop
