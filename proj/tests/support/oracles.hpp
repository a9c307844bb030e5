#pragma once
// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cardioprop/metrics.hpp"
#include "cardioprop/network.hpp"
#include "cardioprop/random.hpp"
#include "cardioprop/stack.hpp"

namespace oracle {

using cardioprop::LabelMask;
using cardioprop::Point3;

// Straight nested-loop 2D convolution (cross-correlation, zero padding k/2).
// in: [C][H][W], w: [O][C][k][k] -> [O][H][W]
inline std::vector<double> conv2d(std::span<const double> in, int C, int H, int W, std::span<const double> w,
                                  std::span<const double> b, int O, int k) {
  std::vector<double> out(static_cast<std::size_t>(O) * H * W, 0.0);
  const int p = k / 2;
  for (int o = 0; o < O; ++o)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = b[o];
        for (int c = 0; c < C; ++c)
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const int yy = y + dy - p, xx = x + dx - p;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              acc += w[((o * C + c) * k + dy) * k + dx] * in[(c * H + yy) * W + xx];
            }
        out[(o * H + y) * W + x] = acc;
      }
  return out;
}

// Central finite difference of f at x[i].
inline double central_difference(const std::function<double()>& f, double& xi, double h = 1e-6) {
  const double keep = xi;
  xi = keep + h;
  const double up = f();
  xi = keep - h;
  const double down = f();
  xi = keep;
  return (up - down) / (2 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Edge count by enumerating every pixel's right and down neighbour.
inline std::int64_t edges(const LabelMask& m, int a, int b) {
  std::int64_t n = 0;
  auto is_pair = [&](int u, int v) { return (u == a && v == b) || (u == b && v == a); };
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (c + 1 < m.cols && is_pair(m(r, c), m(r, c + 1))) ++n;
      if (r + 1 < m.rows && is_pair(m(r, c), m(r + 1, c))) ++n;
    }
  return n;
}

// Recursive-free flood fill; returns per-pixel component ids (-1 = not code)
// and sizes, components numbered in raster order of their first pixel.
inline std::pair<std::vector<int>, std::vector<int>> flood_components(const LabelMask& m, int code) {
  std::vector<int> id(m.size(), -1);
  std::vector<int> sizes;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (m(r, c) != code || id[r * m.cols + c] >= 0) continue;
      const int label = static_cast<int>(sizes.size());
      int size = 0;
      std::vector<std::pair<int, int>> todo{{r, c}};
      id[r * m.cols + c] = label;
      while (!todo.empty()) {
        auto [y, x] = todo.back();
        todo.pop_back();
        ++size;
        const int ny[] = {y - 1, y + 1, y, y}, nx[] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k)
          if (m.inside(ny[k], nx[k]) && m(ny[k], nx[k]) == code && id[ny[k] * m.cols + nx[k]] < 0) {
            id[ny[k] * m.cols + nx[k]] = label;
            todo.push_back({ny[k], nx[k]});
          }
      }
      sizes.push_back(size);
    }
  return {id, sizes};
}

inline LabelMask keep_largest(const LabelMask& m, int code) {
  auto [id, sizes] = flood_components(m, code);
  if (sizes.empty()) return m;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  LabelMask out = m;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (id[i] >= 0 && id[i] != best) out.px[i] = cardioprop::BG;
  return out;
}

// Basal-slice rule evaluated literally, one slice at a time from the apex.
inline int basal_slice(const std::vector<LabelMask>& masks, double t1 = 0.75, double t2 = 0.8) {
  using namespace cardioprop;
  for (int i = static_cast<int>(masks.size()) - 1; i >= 0; --i) {
    const auto& m = masks[i];
    if (edges(m, LVC, BG) + edges(m, LVC, RVC) > 0) return i;
    if (i + 1 < static_cast<int>(masks.size())) {
      const auto& below = masks[i + 1];
      double a = 0, bl = 0, ov = 0;
      for (std::size_t p = 0; p < m.size(); ++p) {
        a += m.px[p] == RVC;
        bl += below.px[p] == RVC;
        ov += m.px[p] == RVC && below.px[p] == RVC;
      }
      if (bl > 0 && ov / bl <= t1 && a / bl <= t2) return i;
    }
  }
  return -1;
}

// Success decision of the post-processing rule, evaluated from scratch.
inline bool successful(const LabelMask& m, double ratio = 0.5) {
  using namespace cardioprop;
  bool has_lvm = std::any_of(m.px.begin(), m.px.end(), [](auto v) { return v == LVM; });
  return has_lvm && static_cast<double>(edges(m, LVC, BG) + edges(m, LVC, RVC)) <= ratio * edges(m, LVC, LVM);
}

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.z - b.z) * (a.z - b.z) + (a.y - b.y) * (a.y - b.y) + (a.x - b.x) * (a.x - b.x));
}

inline double hausdorff(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  double h = 0;
  for (const auto& p : a) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& q : b) m = std::min(m, distance(p, q));
    h = std::max(h, m);
  }
  for (const auto& q : b) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : a) m = std::min(m, distance(p, q));
    h = std::max(h, m);
  }
  return h;
}

inline double directed_mean(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  double s = 0;
  for (const auto& p : a) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& q : b) m = std::min(m, distance(p, q));
    s += m;
  }
  return s / a.size();
}

// Exact two-sided Mann-Whitney p-value by enumerating every split of the
// pooled ranks 1..n+m into groups of size n (no ties).
inline double mann_whitney_exact(int n, int m, double u_observed) {
  const int total = n + m;
  std::vector<int> pick(total, 0);
  std::fill(pick.begin(), pick.begin() + n, 1);
  std::sort(pick.begin(), pick.end());
  const double mean = n * m / 2.0;
  const double dev = std::abs(u_observed - mean);
  long long extreme = 0, all = 0;
  do {
    double rank_sum = 0;
    for (int i = 0; i < total; ++i)
      if (pick[i]) rank_sum += i + 1;
    const double u = rank_sum - n * (n + 1) / 2.0;
    ++all;
    if (std::abs(u - mean) >= dev - 1e-9) ++extreme;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return std::min(1.0, static_cast<double>(extreme) / all);
}

inline LabelMask random_mask(cardioprop::Rng& rng, int rows, int cols, int classes = 4) {
  LabelMask m(rows, cols);
  for (auto& v : m.px) v = static_cast<std::uint8_t>(rng.below(classes));
  return m;
}

// Blobby random label mask: a few random discs painted over background.
inline LabelMask random_blobs(cardioprop::Rng& rng, int rows, int cols, int discs = 6) {
  LabelMask m(rows, cols, cardioprop::BG);
  for (int d = 0; d < discs; ++d) {
    const double cy = rng.uniform(0, rows), cx = rng.uniform(0, cols), r = rng.uniform(1, rows / 3.0);
    const auto code = static_cast<std::uint8_t>(rng.below(4));
    for (int y = 0; y < rows; ++y)
      for (int x = 0; x < cols; ++x)
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) < r * r) m(y, x) = code;
  }
  return m;
}

}  // namespace oracle
