#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "cardioprop/tensor.hpp"

namespace cardioprop {

/// Row-major 2D raster.
template <class T>
struct Raster {
  int rows = 0;
  int cols = 0;
  std::vector<T> px;

  Raster() = default;
  Raster(int r, int c, T fill = T{}) : rows(r), cols(c), px(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return px[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return px[static_cast<std::size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  std::size_t size() const { return px.size(); }
  bool empty() const { return px.empty(); }

  bool operator==(const Raster&) const = default;
};

using Image = Raster<float>;

enum ClassCode : std::uint8_t { BG = 0, LVC = 1, LVM = 2, RVC = 3 };
inline constexpr int kNumClasses = 4;

using LabelMask = Raster<std::uint8_t>;

/// Unordered pair of distinct class codes.
class ClassPair {
 public:
  ClassPair(std::uint8_t a, std::uint8_t b);
  std::uint8_t first() const noexcept { return a_; }
  std::uint8_t second() const noexcept { return b_; }
  bool operator==(const ClassPair&) const = default;

 private:
  std::uint8_t a_, b_;  // a_ < b_
};

enum class Phase { ED, ES };
std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view s);

/// Short-axis slices ordered base to apex.
struct CardiacStack {
  std::vector<Image> slices;
  std::vector<LabelMask> masks;  // empty, or one per slice
  double spacing_row_mm = 1.0;
  double spacing_col_mm = 1.0;
  double thickness_mm = 1.0;
  Phase phase = Phase::ED;
  std::optional<int> base_index;  // nullopt = unknown; -1 = no basal slice found

  int size() const noexcept { return static_cast<int>(slices.size()); }
  int rows() const { return slices.empty() ? 0 : slices.front().rows; }
  int cols() const { return slices.empty() ? 0 : slices.front().cols; }
  bool has_masks() const noexcept { return !masks.empty(); }

  /// Throws Error("format") when the documented invariants do not hold.
  void validate() const;

  bool operator==(const CardiacStack&) const = default;
};

/// Nearest integer, ties away from zero.
int round_half_away(double x);

/// Slice indices [begin, end) selected by S[a, b].
struct SliceRange {
  int begin = 0;
  int end = 0;
  int size() const noexcept { return end > begin ? end - begin : 0; }
};

SliceRange substack_range(int slice_count, double a, double b);
/// Copy of the slices (and masks) S[a, b]; may be empty.
CardiacStack substack(const CardiacStack& stack, double a, double b);
CardiacStack substack(const CardiacStack& stack, SliceRange range);

/// Number of unordered 4-neighbour pixel pairs labelled exactly {pair}.
std::int64_t edge_count(const LabelMask& mask, ClassPair pair);

std::int64_t pixel_count(const LabelMask& mask, std::uint8_t code);
bool contains(const LabelMask& mask, std::uint8_t code);

/// [1, num_classes, rows, cols] tensor; throws on codes >= num_classes.
Tensor one_hot(const LabelMask& mask, int num_classes);
/// Per-pixel argmax over channels of sample n of an NCHW tensor.
LabelMask argmax_labels(const Tensor& probabilities, int n = 0);

/// Relabels BG every pixel of `code` outside its largest 4-connected
/// component. Ties go to the component whose first pixel in raster order
/// comes first.
LabelMask largest_component(const LabelMask& mask, std::uint8_t code);

/// 4-connected component labels (0 = not in set, 1..n) and component sizes.
std::pair<Raster<int>, std::vector<int>> label_components(const Raster<std::uint8_t>& binary);

}  // namespace cardioprop
