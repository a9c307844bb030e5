#include "cardioprop/roi.hpp"

#include <algorithm>
#include <string>

#include "cardioprop/error.hpp"
#include "cardioprop/netbuilder.hpp"

namespace cardioprop {

RoiBox roi_box_from_bounds(int r0, int c0, int r1, int c1, int rows, int cols, double pad_fraction) {
  if (r1 <= r0 || c1 <= c0) throw Error("no-roi", "empty region");
  const int h = r1 - r0, w = c1 - c0;
  int side = std::max(h, w);
  int top = r0 - (side - h) / 2;
  int left = c0 - (side - w) / 2;
  const int pad = std::max(1, round_half_away(pad_fraction * side));
  side += 2 * pad;
  top -= pad;
  left -= pad;
  side = std::min({side, rows, cols});
  top = std::clamp(top, 0, rows - side);
  left = std::clamp(left, 0, cols - side);
  return {top, left, side};
}

RoiBox roi_box_from_mask(const Raster<std::uint8_t>& mask, double pad_fraction) {
  int r0 = mask.rows, c0 = mask.cols, r1 = -1, c1 = -1;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (mask(r, c)) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (r1 < 0) throw Error("no-roi", "no heart detected in the ROI sub-stack");
  return roi_box_from_bounds(r0, c0, r1 + 1, c1 + 1, mask.rows, mask.cols, pad_fraction);
}

std::vector<Raster<std::uint8_t>> predict_heart(Network& net, std::span<const Image> slices, const RoiConfig& config) {
  const auto* slot = net.spec().find_input(kImageInput);
  if (!slot || net.spec().kind != NetKind::roi) throw Error("usage", "heart prediction needs a ROI-net");
  const int size = slot->rows;
  PreprocessConfig pre = config.preprocess;
  pre.target_size = size;
  const int batch = std::max(1, config.batch_size);

  std::vector<Raster<std::uint8_t>> out;
  out.reserve(slices.size());
  for (std::size_t start = 0; start < slices.size(); start += batch) {
    const int n = static_cast<int>(std::min<std::size_t>(batch, slices.size() - start));
    Tensor input({n, 1, size, size});
    for (int k = 0; k < n; ++k) {
      const Image x = preprocess_roi_input(slices[start + k], pre);
      std::copy(x.px.begin(), x.px.end(), input.values().begin() + static_cast<std::ptrdiff_t>(k) * size * size);
    }
    const auto result = net.forward({{kImageInput, std::move(input)}}, Mode::infer);
    const Tensor& prob = result.at(kProbabilityOutput);
    for (int k = 0; k < n; ++k) {
      Raster<std::uint8_t> m(size, size, 0);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) m(r, c) = prob.at(k, 0, r, c) > config.threshold ? 1 : 0;
      const Image& src = slices[start + k];
      out.push_back(largest_component(unpad_resize(m, src.rows, src.cols), 1));
    }
  }
  net.release_cache();
  return out;
}

namespace {

Raster<std::uint8_t> union_of(std::span<const Raster<std::uint8_t>> masks, int rows, int cols) {
  Raster<std::uint8_t> u(rows, cols, 0);
  for (const auto& m : masks)
    for (std::size_t i = 0; i < m.size(); ++i) u.px[i] |= m.px[i] != 0;
  return u;
}

}  // namespace

RoiBox determine_roi(const CardiacStack& ed, Network& net, const RoiConfig& config) {
  const auto range = substack_range(ed.size(), config.range_low * ed.size(), config.range_high * ed.size());
  if (range.size() == 0) throw Error("no-roi", "ROI sub-stack is empty");
  const std::span<const Image> slices(ed.slices.data() + range.begin, range.size());
  const auto masks = predict_heart(net, slices, config);
  return roi_box_from_mask(union_of(masks, ed.rows(), ed.cols()), config.pad_fraction);
}

RoiBox roi_from_masks(const CardiacStack& ed, const RoiConfig& config) {
  if (!ed.has_masks()) throw Error("usage", "ROI from masks needs ground truth");
  const auto range = substack_range(ed.size(), config.range_low * ed.size(), config.range_high * ed.size());
  std::vector<Raster<std::uint8_t>> hearts;
  for (int i = range.begin; i < range.end; ++i) {
    Raster<std::uint8_t> h(ed.rows(), ed.cols(), 0);
    for (std::size_t p = 0; p < h.size(); ++p) h.px[p] = ed.masks[i].px[p] != BG;
    hearts.push_back(largest_component(h, 1));
  }
  return roi_box_from_mask(union_of(hearts, ed.rows(), ed.cols()), config.pad_fraction);
}

CardiacStack crop(const CardiacStack& stack, const RoiBox& box) {
  if (box.side < 1 || box.row < 0 || box.col < 0 || box.row + box.side > stack.rows() ||
      box.col + box.side > stack.cols())
    throw Error("usage", "ROI box (" + std::to_string(box.row) + ", " + std::to_string(box.col) + ", side " +
                             std::to_string(box.side) + ") leaves the " + std::to_string(stack.rows()) + "x" +
                             std::to_string(stack.cols()) + " image");
  CardiacStack out = stack;
  for (auto& s : out.slices) s = crop_raster(s, box);
  for (auto& m : out.masks) m = crop_raster(m, box);
  return out;
}

}  // namespace cardioprop
