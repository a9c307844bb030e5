#include "cardioprop/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cardioprop/error.hpp"

namespace cardioprop {

void PreprocessConfig::validate() const {
  if (target_size <= 0 || target_size % 2) throw Error("usage", "target size must be positive and even");
  if (!(clahe_clip_limit >= 1.0)) throw Error("usage", "CLAHE clip limit must be >= 1");
  if (clahe_tiles <= 0) throw Error("usage", "CLAHE tile grid must be positive");
  if (!(percentile_low >= 0 && percentile_low <= percentile_high && percentile_high <= 100))
    throw Error("usage", "percentile window must satisfy 0 <= low <= high <= 100");
}

double percentile(std::span<const float> values, double p) {
  if (values.empty()) throw Error("usage", "percentile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

Image clip_percentiles(const Image& image, double low, double high) {
  if (image.empty()) throw Error("usage", "cannot clip an empty image");
  const double lo = percentile(image.px, low);
  const double hi = percentile(image.px, high);
  Image out = image;
  for (auto& v : out.px) v = static_cast<float>(std::clamp(static_cast<double>(v), lo, hi));
  return out;
}

GrayImage rescale_to_bins(const Image& image) {
  GrayImage out(image.rows, image.cols, 0);
  if (image.empty()) return out;
  const auto [mn, mx] = std::minmax_element(image.px.begin(), image.px.end());
  const double lo = *mn, span = static_cast<double>(*mx) - lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < image.size(); ++i)
    out.px[i] = static_cast<std::uint8_t>(std::lround((image.px[i] - lo) / span * 255.0));
  return out;
}

namespace {

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

}  // namespace

GrayImage clahe(const GrayImage& image, double clip_limit, int tiles) {
  if (tiles <= 0) throw Error("usage", "CLAHE tile grid must be positive");
  if (image.rows < tiles || image.cols < tiles)
    throw Error("usage", "image " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                             " smaller than the " + std::to_string(tiles) + "x" + std::to_string(tiles) + " tile grid");
  constexpr int kBins = 256;
  const int tile_h = (image.rows + tiles - 1) / tiles;
  const int tile_w = (image.cols + tiles - 1) / tiles;
  const int tile_area = tile_h * tile_w;
  const int limit = std::max(1, static_cast<int>(clip_limit * tile_area / kBins));
  const double lut_scale = 255.0 / tile_area;

  std::vector<std::array<std::uint8_t, kBins>> luts(static_cast<std::size_t>(tiles) * tiles);
  for (int ty = 0; ty < tiles; ++ty)
    for (int tx = 0; tx < tiles; ++tx) {
      std::array<int, kBins> hist{};
      for (int r = ty * tile_h; r < (ty + 1) * tile_h; ++r)
        for (int c = tx * tile_w; c < (tx + 1) * tile_w; ++c)
          ++hist[image(reflect101(r, image.rows), reflect101(c, image.cols))];

      int clipped = 0;
      for (int& h : hist)
        if (h > limit) {
          clipped += h - limit;
          h = limit;
        }
      const int batch = clipped / kBins;
      int residual = clipped - batch * kBins;
      for (int& h : hist) h += batch;
      if (residual > 0) {
        const int step = std::max(kBins / residual, 1);
        for (int i = 0; i < kBins && residual > 0; i += step, --residual) ++hist[i];
      }

      auto& lut = luts[static_cast<std::size_t>(ty) * tiles + tx];
      int sum = 0;
      for (int i = 0; i < kBins; ++i) {
        sum += hist[i];
        // lrint: ties to even, like cvRound
        lut[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lrint(sum * lut_scale), 0, 255));
      }
    }

  GrayImage out(image.rows, image.cols, 0);
  const double inv_h = 1.0 / tile_h, inv_w = 1.0 / tile_w;
  for (int r = 0; r < image.rows; ++r) {
    const double tyf = r * inv_h - 0.5;
    int ty1 = static_cast<int>(std::floor(tyf));
    int ty2 = ty1 + 1;
    const double ya = tyf - ty1;
    ty1 = std::max(ty1, 0);
    ty2 = std::min(ty2, tiles - 1);
    for (int c = 0; c < image.cols; ++c) {
      const double txf = c * inv_w - 0.5;
      int tx1 = static_cast<int>(std::floor(txf));
      int tx2 = tx1 + 1;
      const double xa = txf - tx1;
      tx1 = std::max(tx1, 0);
      tx2 = std::min(tx2, tiles - 1);
      const int v = image(r, c);
      const auto& l11 = luts[static_cast<std::size_t>(ty1) * tiles + tx1];
      const auto& l12 = luts[static_cast<std::size_t>(ty1) * tiles + tx2];
      const auto& l21 = luts[static_cast<std::size_t>(ty2) * tiles + tx1];
      const auto& l22 = luts[static_cast<std::size_t>(ty2) * tiles + tx2];
      const double res = (l11[v] * (1 - xa) + l12[v] * xa) * (1 - ya) + (l21[v] * (1 - xa) + l22[v] * xa) * ya;
      out(r, c) = static_cast<std::uint8_t>(std::clamp<long>(std::lrint(res), 0, 255));
    }
  }
  return out;
}

Normalized normalize(const Image& image, double low, double high) {
  Normalized result{image, false};
  if (image.empty()) return result;
  const double lo = percentile(image.px, low);
  const double hi = percentile(image.px, high);
  double sum = 0.0;
  std::size_t n = 0;
  for (float v : image.px)
    if (v >= lo && v <= hi) {
      sum += v;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (float v : image.px)
    if (v >= lo && v <= hi) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0)) {
    sd = 1.0;
    result.degenerate_std = true;
  }
  for (std::size_t i = 0; i < image.size(); ++i)
    result.image.px[i] = static_cast<float>((image.px[i] - mean) / sd);
  return result;
}

Image preprocess_roi_input(const Image& image, const PreprocessConfig& config) {
  const Image clipped = clip_percentiles(image, config.percentile_low, config.percentile_high);
  const GrayImage eq = clahe(rescale_to_bins(clipped), config.clahe_clip_limit, config.clahe_tiles);
  Image as_float(eq.rows, eq.cols, 0.0f);
  for (std::size_t i = 0; i < eq.size(); ++i) as_float.px[i] = eq.px[i];
  return normalize(pad_resize(as_float, config.target_size), config.percentile_low, config.percentile_high).image;
}

Image preprocess_seg_input(const Image& image, int target_size, const PreprocessConfig& config) {
  return normalize(pad_resize(image, target_size), config.percentile_low, config.percentile_high).image;
}

}  // namespace cardioprop
