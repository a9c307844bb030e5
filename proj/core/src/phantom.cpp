#include "cardioprop/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cardioprop/error.hpp"
#include "cardioprop/random.hpp"

namespace cardioprop {

namespace {

constexpr double kPi = std::numbers::pi;

struct Ellipse {
  double cy, cx, ry, rx, angle, value;
};

// Everything about a subject that both phases share.
struct Anatomy {
  double cy, cx;                 // LV centre on the basal slice
  double drift_y, drift_x;       // displacement reached at the apex
  double radius_scale;
  double rv_angle;               // direction LV -> RV
  double distractor_angle;
  double gain;
  double blood, myo, body, air;
  Ellipse body_shape;
  std::vector<Ellipse> organs;
  std::vector<double> jitter_y, jitter_x;
};

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2 * kPi);
  if (d > kPi) d -= 2 * kPi;
  if (d < -kPi) d += 2 * kPi;
  return d;
}

bool in_ellipse(const Ellipse& e, double y, double x) {
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  const double dy = y - e.cy, dx = x - e.cx;
  const double u = (ca * dx + sa * dy) / e.rx, v = (-sa * dx + ca * dy) / e.ry;
  return u * u + v * v <= 1.0;
}

Anatomy draw_anatomy(const PhantomConfig& cfg) {
  Rng rng(cfg.seed);
  const bool vary = cfg.vary_anatomy;
  auto jit = [&](double lo, double hi, double nominal) { return vary ? rng.uniform(lo, hi) : nominal; };
  const double scale = std::min(cfg.rows, cfg.cols) / 128.0;

  Anatomy a;
  a.cy = cfg.rows / 2.0 + jit(-10, 10, 0) * scale;
  a.cx = cfg.cols / 2.0 + jit(-10, 10, 0) * scale;
  const double drift_dir = jit(0, 2 * kPi, 0.25 * kPi);
  const double drift_len = cfg.drift * jit(0.5, 1.0, 1.0);
  a.drift_y = drift_len * std::sin(drift_dir);
  a.drift_x = drift_len * std::cos(drift_dir);
  a.radius_scale = jit(0.88, 1.12, 1.0);
  a.rv_angle = kPi + jit(-0.5, 0.5, 0.0);
  a.distractor_angle = a.rv_angle + kPi + jit(-0.8, 0.8, 0.0);
  a.gain = jit(80, 400, 200);
  a.blood = jit(0.9, 1.1, 1.0);
  a.myo = jit(0.25, 0.35, 0.3);
  a.body = jit(0.4, 0.55, 0.45);
  a.air = jit(0.0, 0.05, 0.02);
  a.body_shape = {cfg.rows / 2.0, cfg.cols / 2.0, cfg.rows * jit(0.40, 0.47, 0.44), cfg.cols * jit(0.42, 0.48, 0.46),
                  jit(-0.2, 0.2, 0.0), a.body};
  if (vary) {
    // Lungs (dark) either side of the heart and a bright liver-like organ low down.
    for (int side : {-1, 1})
      a.organs.push_back({a.cy + rng.uniform(-15, 5) * scale, a.cx + side * rng.uniform(30, 40) * scale,
                          rng.uniform(18, 28) * scale, rng.uniform(10, 16) * scale, rng.uniform(-0.4, 0.4),
                          rng.uniform(0.05, 0.15)});
    a.organs.push_back({a.cy + rng.uniform(30, 42) * scale, a.cx + rng.uniform(-20, 20) * scale,
                        rng.uniform(10, 16) * scale, rng.uniform(20, 30) * scale, rng.uniform(-0.3, 0.3),
                        rng.uniform(0.55, 0.7)});
  }
  for (int i = 0; i < cfg.slices; ++i) {
    a.jitter_y.push_back(rng.uniform(-cfg.jitter, cfg.jitter));
    a.jitter_x.push_back(rng.uniform(-cfg.jitter, cfg.jitter));
  }
  return a;
}

// Geometry of the heart on one slice.
struct SliceGeometry {
  double cy, cx;
  double lvc, lvo;          // cavity and epicardial radii
  double rv_radius, rv_offset;
  bool open_ring = false;   // above the base: myocardium has a gap
  bool rv_arc_only = false; // basal slice: RV much smaller than below
  bool distractor = false;
  double d_cy = 0, d_cx = 0, d_lvc = 0, d_lvo = 0;
};

SliceGeometry slice_geometry(const PhantomConfig& cfg, const Anatomy& a, Phase phase, int i) {
  const int base = cfg.above_base_slices;
  const int span = cfg.slices - 1 - base;
  const double t = i <= base || span <= 0 ? 0.0 : static_cast<double>(i - base) / span;
  const double taper = std::sqrt(std::max(0.0, 1.0 - t * t));
  const double es_cavity = phase == Phase::ES ? 0.68 : 1.0;
  const double es_wall = phase == Phase::ES ? 1.3 : 1.0;
  const double es_rv = phase == Phase::ES ? 0.78 : 1.0;
  const double s = a.radius_scale;

  SliceGeometry g;
  g.cy = a.cy + a.drift_y * t + a.jitter_y[i];
  g.cx = a.cx + a.drift_x * t + a.jitter_x[i];
  g.lvc = s * es_cavity * (cfg.lvc_radius_apex + (cfg.lvc_radius_base - cfg.lvc_radius_apex) * taper);
  const double wall = s * es_wall * (cfg.wall_base + (cfg.wall_apex - cfg.wall_base) * t);
  g.lvo = g.lvc + wall;
  g.rv_radius = s * es_rv * cfg.rv_radius_base * (1.0 - (1.0 - cfg.rv_apex_scale) * t);
  g.rv_offset = g.lvo + 0.25 * g.rv_radius;
  if (i < base) {
    g.lvc *= 1.05;
    g.lvo = g.lvc + wall;
    g.open_ring = true;
  }
  g.rv_arc_only = i == base;

  if (cfg.distractor && i > base && t >= 0.45) {
    // Sized like the apical LV so that, locally, the two look alike.
    const double apical = 0.7;
    const double taper_d = std::sqrt(1.0 - apical * apical);
    g.d_lvc = s * (cfg.lvc_radius_apex + (cfg.lvc_radius_base - cfg.lvc_radius_apex) * taper_d);
    g.d_lvo = g.d_lvc + s * (cfg.wall_base + (cfg.wall_apex - cfg.wall_base) * apical);
    const double dist = g.lvo + g.d_lvo + 3.0;
    g.d_cy = g.cy + dist * std::sin(a.distractor_angle);
    g.d_cx = g.cx + dist * std::cos(a.distractor_angle);
    g.distractor = true;
  }
  return g;
}

std::uint8_t heart_label(const SliceGeometry& g, const Anatomy& a, double y, double x) {
  const double dy = y - g.cy, dx = x - g.cx;
  const double r = std::hypot(dy, dx);
  if (r < g.lvo) {
    if (r < g.lvc) return LVC;
    if (g.open_ring) {
      // Gap in the ring facing away from the RV: the cavity opens onto background.
      const double theta = std::atan2(dy, dx);
      if (std::abs(angle_diff(theta, a.rv_angle + kPi)) < kPi / 3) return BG;
    }
    return LVM;
  }
  const double ry = y - (g.cy + g.rv_offset * std::sin(a.rv_angle));
  const double rx = x - (g.cx + g.rv_offset * std::cos(a.rv_angle));
  // On the basal slice only the part of the RV nearest the septum remains.
  const double rv_radius = g.rv_arc_only ? 0.55 * g.rv_radius : g.rv_radius;
  return std::hypot(ry, rx) < rv_radius ? RVC : BG;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

void blur(std::vector<double>& img, int rows, int cols, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(img.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0;
      for (int j = -radius; j <= radius; ++j) acc += k[j + radius] * img[r * cols + std::clamp(c + j, 0, cols - 1)];
      tmp[r * cols + c] = acc;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0;
      for (int j = -radius; j <= radius; ++j) acc += k[j + radius] * tmp[std::clamp(r + j, 0, rows - 1) * cols + c];
      img[r * cols + c] = acc;
    }
}

CardiacStack render(const PhantomConfig& cfg, const Anatomy& a, Phase phase, std::uint64_t noise_seed) {
  Rng noise(noise_seed);
  CardiacStack stack;
  stack.spacing_row_mm = stack.spacing_col_mm = cfg.spacing_mm;
  stack.thickness_mm = cfg.thickness_mm;
  stack.phase = phase;
  stack.base_index = cfg.above_base_slices;
  for (int i = 0; i < cfg.slices; ++i) {
    const auto g = slice_geometry(cfg, a, phase, i);
    LabelMask mask(cfg.rows, cfg.cols, BG);
    std::vector<double> img(mask.size());
    for (int r = 0; r < cfg.rows; ++r)
      for (int c = 0; c < cfg.cols; ++c) {
        const double y = r, x = c;
        double v = in_ellipse(a.body_shape, y, x) ? a.body : a.air;
        for (const auto& o : a.organs)
          if (in_ellipse(o, y, x)) v = o.value;
        if (g.distractor) {
          const double rd = std::hypot(y - g.d_cy, x - g.d_cx);
          if (rd < g.d_lvo) v = rd < g.d_lvc ? a.blood : a.myo;
        }
        const auto label = heart_label(g, a, y, x);
        if (label == LVC || label == RVC) v = a.blood;
        if (label == LVM) v = a.myo;
        // A thin pericardial fat rim helps the eye but not the masks.
        if (label == BG && std::hypot(y - g.cy, x - g.cx) < g.lvo + 1.5 && !g.open_ring) v = std::max(v, 0.6);
        mask(r, c) = label;
        img[static_cast<std::size_t>(r) * cfg.cols + c] = v;
      }
    blur(img, cfg.rows, cfg.cols, cfg.blur_sigma);
    Image out(cfg.rows, cfg.cols);
    for (std::size_t p = 0; p < img.size(); ++p)
      out.px[p] = static_cast<float>(std::max(0.0, a.gain * (img[p] + cfg.noise * noise.normal())));
    stack.slices.push_back(std::move(out));
    stack.masks.push_back(std::move(mask));
  }
  return stack;
}

}  // namespace

void validate(const PhantomConfig& c) {
  auto fail = [](const std::string& what) { throw Error("config", "phantom: " + what); };
  if (c.rows < 16 || c.cols < 16) fail("image must be at least 16x16");
  if (c.slices < 1) fail("need at least one slice");
  if (c.above_base_slices < 0 || c.above_base_slices >= c.slices) fail("above_base_slices must lie in [0, slices)");
  if (!(c.spacing_mm > 0) || !(c.thickness_mm > 0)) fail("spacing and thickness must be positive");
  if (!(c.lvc_radius_apex >= 1.0) || c.lvc_radius_base < c.lvc_radius_apex)
    fail("LV cavity radii must satisfy 1 <= apex <= base");
  if (!(c.wall_base >= 1.5) || !(c.wall_apex >= 1.5)) fail("wall thickness must be at least 1.5 px");
  if (!(c.rv_radius_base > 0) || !(c.rv_apex_scale > 0) || c.rv_apex_scale > 1) fail("RV radius must taper towards the apex");
  if (c.noise < 0 || c.blur_sigma < 0 || c.jitter < 0 || c.drift < 0) fail("noise, blur, jitter and drift must be >= 0");
  // Worst case extent of the heart (largest radii with anatomy jitter) from its centre.
  const double s = 1.12 * 1.05;
  const double lvo = s * (c.lvc_radius_base + std::max(c.wall_base, c.wall_apex) * 1.3);
  const double extent = lvo + 1.25 * s * c.rv_radius_base + c.drift + c.jitter;
  const double margin = std::min(c.rows, c.cols) / 2.0 - 10.0 * std::min(c.rows, c.cols) / 128.0 - 1.0;
  if (extent > margin) fail("heart does not fit in the image (extent " + std::to_string(extent) + " px)");
}

PhantomCase generate_case(const PhantomConfig& config) {
  validate(config);
  const Anatomy anatomy = draw_anatomy(config);
  Rng seeds(config.seed ^ 0x5bd1e995ULL);
  const auto ed_seed = seeds.fork(), es_seed = seeds.fork();
  return {render(config, anatomy, Phase::ED, ed_seed), render(config, anatomy, Phase::ES, es_seed)};
}

CardiacStack generate(const PhantomConfig& config, Phase phase) {
  validate(config);
  const Anatomy anatomy = draw_anatomy(config);
  Rng seeds(config.seed ^ 0x5bd1e995ULL);
  const auto ed_seed = seeds.fork(), es_seed = seeds.fork();
  return render(config, anatomy, phase, phase == Phase::ED ? ed_seed : es_seed);
}

}  // namespace cardioprop
