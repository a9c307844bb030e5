#include "cardioprop/stack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cardioprop/error.hpp"

namespace cardioprop {

ClassPair::ClassPair(std::uint8_t a, std::uint8_t b) : a_(std::min(a, b)), b_(std::max(a, b)) {
  if (a == b) throw Error("usage", "class pair needs two distinct classes");
}

std::string_view to_string(Phase phase) { return phase == Phase::ED ? "ED" : "ES"; }

Phase phase_from_string(std::string_view s) {
  if (s == "ED") return Phase::ED;
  if (s == "ES") return Phase::ES;
  throw Error("format", "unknown phase '" + std::string(s) + "'");
}

void CardiacStack::validate() const {
  if (slices.empty()) throw Error("format", "stack has no slices");
  const int r = slices.front().rows, c = slices.front().cols;
  if (r <= 0 || c <= 0) throw Error("format", "slice 0 is empty");
  for (std::size_t i = 0; i < slices.size(); ++i)
    if (slices[i].rows != r || slices[i].cols != c || slices[i].size() != static_cast<std::size_t>(r) * c)
      throw Error("format", "slice " + std::to_string(i) + " dimensions differ from slice 0");
  if (!(spacing_row_mm > 0 && spacing_col_mm > 0 && thickness_mm > 0))
    throw Error("format", "spacing and thickness must be positive");
  if (base_index && (*base_index < -1 || *base_index >= size()))
    throw Error("format", "base index " + std::to_string(*base_index) + " outside [-1, N-1]");
  if (!masks.empty()) {
    if (masks.size() != slices.size())
      throw Error("format", "mask count " + std::to_string(masks.size()) + " differs from slice count");
    for (std::size_t i = 0; i < masks.size(); ++i) {
      if (masks[i].rows != r || masks[i].cols != c)
        throw Error("format", "mask " + std::to_string(i) + " dimensions differ from slices");
      for (auto v : masks[i].px)
        if (v >= kNumClasses) throw Error("format", "mask " + std::to_string(i) + " has class code " + std::to_string(v));
    }
  }
}

int round_half_away(double x) { return static_cast<int>(std::round(x)); }

SliceRange substack_range(int slice_count, double a, double b) {
  if (a > b) throw Error("usage", "substack bounds reversed: a=" + std::to_string(a) + " > b=" + std::to_string(b));
  SliceRange r{round_half_away(a), round_half_away(b)};
  r.begin = std::clamp(r.begin, 0, slice_count);
  r.end = std::clamp(r.end, r.begin, slice_count);
  return r;
}

CardiacStack substack(const CardiacStack& stack, double a, double b) {
  return substack(stack, substack_range(stack.size(), a, b));
}

CardiacStack substack(const CardiacStack& stack, SliceRange range) {
  CardiacStack out;
  out.spacing_row_mm = stack.spacing_row_mm;
  out.spacing_col_mm = stack.spacing_col_mm;
  out.thickness_mm = stack.thickness_mm;
  out.phase = stack.phase;
  for (int i = range.begin; i < range.end; ++i) {
    out.slices.push_back(stack.slices[i]);
    if (stack.has_masks()) out.masks.push_back(stack.masks[i]);
  }
  if (stack.base_index) {
    const int shifted = *stack.base_index - range.begin;
    if (shifted >= -1 && shifted < out.size()) out.base_index = shifted;
  }
  return out;
}

std::int64_t edge_count(const LabelMask& mask, ClassPair pair) {
  const auto a = pair.first(), b = pair.second();
  auto match = [&](std::uint8_t p, std::uint8_t q) { return (p == a && q == b) || (p == b && q == a); };
  std::int64_t n = 0;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c) {
      const auto v = mask(r, c);
      if (c + 1 < mask.cols && match(v, mask(r, c + 1))) ++n;
      if (r + 1 < mask.rows && match(v, mask(r + 1, c))) ++n;
    }
  return n;
}

std::int64_t pixel_count(const LabelMask& mask, std::uint8_t code) {
  return std::count(mask.px.begin(), mask.px.end(), code);
}

bool contains(const LabelMask& mask, std::uint8_t code) {
  return std::find(mask.px.begin(), mask.px.end(), code) != mask.px.end();
}

Tensor one_hot(const LabelMask& mask, int num_classes) {
  Tensor t({1, num_classes, mask.rows, mask.cols}, 0.0);
  const std::size_t hw = mask.size();
  for (std::size_t i = 0; i < hw; ++i) {
    const int code = mask.px[i];
    if (code >= num_classes)
      throw Error("usage", "class code " + std::to_string(code) + " out of range for " +
                               std::to_string(num_classes) + " classes");
    t[code * hw + i] = 1.0;
  }
  return t;
}

LabelMask argmax_labels(const Tensor& probabilities, int n) {
  const int C = probabilities.dim(1), H = probabilities.dim(2), W = probabilities.dim(3);
  LabelMask m(H, W, 0);
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const double* p = probabilities.data().data() + static_cast<std::size_t>(n) * C * hw;
  for (std::size_t i = 0; i < hw; ++i) {
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (p[c * hw + i] > p[best * hw + i]) best = c;
    m.px[i] = static_cast<std::uint8_t>(best);
  }
  return m;
}

std::pair<Raster<int>, std::vector<int>> label_components(const Raster<std::uint8_t>& binary) {
  Raster<int> labels(binary.rows, binary.cols, 0);
  std::vector<int> sizes;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < binary.rows; ++r)
    for (int c = 0; c < binary.cols; ++c) {
      if (!binary(r, c) || labels(r, c)) continue;
      const int id = static_cast<int>(sizes.size()) + 1;
      int count = 0;
      labels(r, c) = id;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        ++count;
        constexpr int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (binary.inside(ny, nx) && binary(ny, nx) && !labels(ny, nx)) {
            labels(ny, nx) = id;
            stack.push_back({ny, nx});
          }
        }
      }
      sizes.push_back(count);
    }
  return {std::move(labels), std::move(sizes)};
}

LabelMask largest_component(const LabelMask& mask, std::uint8_t code) {
  Raster<std::uint8_t> binary(mask.rows, mask.cols, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) binary.px[i] = mask.px[i] == code;
  auto [labels, sizes] = label_components(binary);
  if (sizes.size() <= 1) return mask;
  // Components are numbered in raster order of their seed, so the first
  // maximum is the tie-break winner.
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin()) + 1;
  LabelMask out = mask;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (labels.px[i] && labels.px[i] != keep) out.px[i] = BG;
  return out;
}

}  // namespace cardioprop
