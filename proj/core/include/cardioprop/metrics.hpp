#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cardioprop/stack.hpp"

namespace cardioprop {

enum class Structure { LVC, LVM, LV_epi, RVC, heart };

std::string_view to_string(Structure s);
inline constexpr std::array<Structure, 4> kReportedStructures{Structure::LVM, Structure::LVC, Structure::LV_epi,
                                                              Structure::RVC};

using BinaryMask = Raster<std::uint8_t>;  // 0/1
/// One binary raster per slice, base to apex. A 2D mask is a one-slice volume.
using BinaryVolume = std::vector<BinaryMask>;

BinaryMask structure_mask(const LabelMask& mask, Structure s);
BinaryVolume structure_volume(std::span<const LabelMask> masks, Structure s);

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dice(const BinaryVolume& a, const BinaryVolume& b);
double dice(const BinaryMask& a, const BinaryMask& b);

struct Point3 {
  double z = 0, y = 0, x = 0;  // mm
};

struct VoxelSpacing {
  double row_mm = 1.0;
  double col_mm = 1.0;
  double slice_mm = 1.0;
};

/// Pixels of the set with at least one 4-neighbour (in-plane) outside it, in
/// physical coordinates (z = slice index * thickness).
std::vector<Point3> boundary_points(const BinaryVolume& volume, const VoxelSpacing& spacing);

/// Symmetric Hausdorff distance between finite point sets; throws Error("undefined")
/// when either set is empty.
double hausdorff(std::span<const Point3> a, std::span<const Point3> b);
/// Mean over a of the distance to the nearest point of b.
double directed_mean_distance(std::span<const Point3> a, std::span<const Point3> b);
/// Average of both directed mean distances; throws Error("undefined") on empty input.
double average_distance(std::span<const Point3> a, std::span<const Point3> b);

/// Boundary-based Hausdorff between masks; nullopt when either is empty.
std::optional<double> hausdorff(const BinaryVolume& a, const BinaryVolume& b, const VoxelSpacing& spacing);
/// Contour APD between 2D masks; nullopt when either is empty.
std::optional<double> apd(const BinaryMask& predicted, const BinaryMask& truth, const VoxelSpacing& spacing);

inline constexpr double kGoodContourMm = 5.0;
/// Fraction of entries with a defined APD below 5 mm; missing entries are bad.
double pgc(std::span<const std::optional<double>> apds);

/// Fraction of masks that contain the structure.
double presence_rate(std::span<const LabelMask> predictions, Structure s);

/// Splits slices base+1 .. last slice where `present` is true into 5
/// contiguous groups whose sizes differ by at most one, larger groups first.
std::array<std::vector<int>, 5> slice_groups(int base, std::span<const bool> present);

struct MannWhitneyResult {
  double u_a = 0;   // pairs with a > b, ties counted half
  double u_b = 0;
  double u = 0;     // min(u_a, u_b)
  double p_value = 1;
  bool exact = false;
};

/// Two-sided Mann-Whitney U test. Exact null distribution when the smaller
/// sample has at most 8 values and there are no ties; otherwise the normal
/// approximation with tie and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Per-case evaluation

struct StructureMetrics {
  double dice = 0.0;
  std::optional<double> hausdorff_mm;
  std::vector<std::optional<double>> slice_apd_mm;  // one per slice where truth has the structure
  double pgc = 0.0;
  double presence_rate = 0.0;
  std::array<std::vector<double>, 5> group_hausdorff_mm;  // 2D, defined pairs only
  std::array<int, 5> group_slices{};   // slices in each group
  std::array<int, 5> group_present{};  // of which the prediction contains the structure
};

struct CaseMetrics {
  std::string case_id;
  Phase phase = Phase::ED;
  std::map<Structure, StructureMetrics> structures;
};

/// Compares predictions against (adapted) ground truth over `range`; groups
/// start below truth.base_index (or at the first slice when unknown).
CaseMetrics evaluate_case(std::string case_id, std::span<const LabelMask> predictions, const CardiacStack& truth,
                          SliceRange range, std::span<const Structure> structures = kReportedStructures);

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t count = 0;
};
SummaryStat summarize(std::span<const double> values);

struct MetricsReport {
  std::vector<CaseMetrics> cases;

  std::vector<double> dice_samples(Structure s) const;
  std::vector<double> hausdorff_samples(Structure s) const;  // defined values only
  std::size_t hausdorff_missing(Structure s) const;
  /// Pooled presence rate of a group across cases (heart by default).
  std::optional<double> group_presence(int group, Structure s = Structure::heart) const;
};

void to_json(nlohmann::json& j, const MetricsReport& report);
/// Fixed-width text table of the summary.
std::string format_table(const MetricsReport& report);

}  // namespace cardioprop
