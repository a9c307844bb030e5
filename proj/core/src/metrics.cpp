#include "cardioprop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cardioprop/error.hpp"

namespace cardioprop {

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::LVC: return "LVC";
    case Structure::LVM: return "LVM";
    case Structure::LV_epi: return "LV-epi";
    case Structure::RVC: return "RVC";
    case Structure::heart: return "heart";
  }
  return "unknown";
}

namespace {

bool in_structure(std::uint8_t code, Structure s) {
  switch (s) {
    case Structure::LVC: return code == LVC;
    case Structure::LVM: return code == LVM;
    case Structure::LV_epi: return code == LVC || code == LVM;
    case Structure::RVC: return code == RVC;
    case Structure::heart: return code != BG;
  }
  return false;
}

bool any(const BinaryMask& m) { return std::any_of(m.px.begin(), m.px.end(), [](auto v) { return v != 0; }); }

double squared(const Point3& p, const Point3& q) {
  const double dz = p.z - q.z, dy = p.y - q.y, dx = p.x - q.x;
  return dz * dz + dy * dy + dx * dx;
}

double nearest_squared(const Point3& p, std::span<const Point3> set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) best = std::min(best, squared(p, q));
  return best;
}

// Early-break directed Hausdorff: a point stops scanning as soon as it finds a
// neighbour closer than the current maximum, since it cannot raise it.
double directed_hausdorff_squared(std::span<const Point3> a, std::span<const Point3> b) {
  double cmax = 0.0;
  for (const auto& p : a) {
    double cmin = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      const double d = squared(p, q);
      if (d < cmin) {
        cmin = d;
        if (cmin < cmax) break;
      }
    }
    if (cmin > cmax) cmax = cmin;
  }
  return cmax;
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

BinaryMask structure_mask(const LabelMask& mask, Structure s) {
  BinaryMask out(mask.rows, mask.cols, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) out.px[i] = in_structure(mask.px[i], s) ? 1 : 0;
  return out;
}

BinaryVolume structure_volume(std::span<const LabelMask> masks, Structure s) {
  BinaryVolume v;
  v.reserve(masks.size());
  for (const auto& m : masks) v.push_back(structure_mask(m, s));
  return v;
}

double dice(const BinaryVolume& a, const BinaryVolume& b) {
  if (a.size() != b.size()) throw Error("shape", "dice: volumes have different slice counts");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows != b[k].rows || a[k].cols != b[k].cols) throw Error("shape", "dice: slice dimensions differ");
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      const bool x = a[k].px[i] != 0, y = b[k].px[i] != 0;
      na += x;
      nb += y;
      inter += x && y;
    }
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double dice(const BinaryMask& a, const BinaryMask& b) { return dice(BinaryVolume{a}, BinaryVolume{b}); }

std::vector<Point3> boundary_points(const BinaryVolume& volume, const VoxelSpacing& spacing) {
  std::vector<Point3> pts;
  for (std::size_t k = 0; k < volume.size(); ++k) {
    const auto& m = volume[k];
    auto inside = [&](int r, int c) { return m.inside(r, c) && m(r, c) != 0; };
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c) {
        if (!m(r, c)) continue;
        if (inside(r - 1, c) && inside(r + 1, c) && inside(r, c - 1) && inside(r, c + 1)) continue;
        pts.push_back({static_cast<double>(k) * spacing.slice_mm, r * spacing.row_mm, c * spacing.col_mm});
      }
  }
  return pts;
}

double hausdorff(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw Error("undefined", "undefined distance: empty point set");
  return std::sqrt(std::max(directed_hausdorff_squared(a, b), directed_hausdorff_squared(b, a)));
}

double directed_mean_distance(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw Error("undefined", "undefined distance: empty point set");
  double sum = 0.0;
  for (const auto& p : a) sum += std::sqrt(nearest_squared(p, b));
  return sum / static_cast<double>(a.size());
}

double average_distance(std::span<const Point3> a, std::span<const Point3> b) {
  return 0.5 * (directed_mean_distance(a, b) + directed_mean_distance(b, a));
}

std::optional<double> hausdorff(const BinaryVolume& a, const BinaryVolume& b, const VoxelSpacing& spacing) {
  const auto pa = boundary_points(a, spacing), pb = boundary_points(b, spacing);
  if (pa.empty() || pb.empty()) return std::nullopt;
  return hausdorff(pa, pb);
}

std::optional<double> apd(const BinaryMask& predicted, const BinaryMask& truth, const VoxelSpacing& spacing) {
  const auto pa = boundary_points({predicted}, spacing), pb = boundary_points({truth}, spacing);
  if (pa.empty() || pb.empty()) return std::nullopt;
  return average_distance(pa, pb);
}

double pgc(std::span<const std::optional<double>> apds) {
  if (apds.empty()) throw Error("usage", "PGC of an empty contour list");
  const auto good = std::count_if(apds.begin(), apds.end(), [](const auto& d) { return d && *d < kGoodContourMm; });
  return static_cast<double>(good) / static_cast<double>(apds.size());
}

double presence_rate(std::span<const LabelMask> predictions, Structure s) {
  if (predictions.empty()) throw Error("usage", "presence rate of an empty sub-stack");
  const auto n = std::count_if(predictions.begin(), predictions.end(),
                               [&](const LabelMask& m) { return any(structure_mask(m, s)); });
  return static_cast<double>(n) / static_cast<double>(predictions.size());
}

std::array<std::vector<int>, 5> slice_groups(int base, std::span<const bool> present) {
  int last = -1;
  for (int i = 0; i < static_cast<int>(present.size()); ++i)
    if (present[i]) last = i;
  if (last < 0) throw Error("undefined", "structure absent on every slice; no slice groups");
  const int first = std::max(base + 1, 0);
  const int n = std::max(0, last - first + 1);
  std::array<std::vector<int>, 5> groups;
  int next = first;
  for (int g = 0; g < 5; ++g) {
    const int size = n / 5 + (g < n % 5 ? 1 : 0);
    for (int k = 0; k < size; ++k) groups[g].push_back(next++);
  }
  return groups;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("usage", "Mann-Whitney U needs two non-empty samples");
  const std::size_t n = a.size(), m = b.size(), total = n + m;

  // Midranks of the pooled sample.
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(total);
  for (double v : a) pooled.push_back({v, 0});
  for (double v : b) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum_a = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += mid;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  r.u_a = rank_sum_a - nn * (nn + 1) / 2.0;
  r.u_b = nn * mm - r.u_a;
  r.u = std::min(r.u_a, r.u_b);

  if (std::min(n, m) <= 8 && !ties) {
    // counts[i][u]: arrangements of i values of the small sample among the
    // large-sample values seen so far with statistic u. Built one large value
    // at a time: f(i, j, u) = f(i, j-1, u) + f(i-1, j, u - j).
    const std::size_t small = std::min(n, m), large = std::max(n, m);
    const std::size_t umax = small * large;
    std::vector<std::vector<double>> prev(small + 1, std::vector<double>(umax + 1, 0.0));
    for (std::size_t i = 0; i <= small; ++i) prev[i][0] = 1.0;  // j = 0
    for (std::size_t j = 1; j <= large; ++j) {
      std::vector<std::vector<double>> cur(small + 1, std::vector<double>(umax + 1, 0.0));
      cur[0][0] = 1.0;
      for (std::size_t i = 1; i <= small; ++i)
        for (std::size_t u = 0; u <= umax; ++u) cur[i][u] = prev[i][u] + (u >= j ? cur[i - 1][u - j] : 0.0);
      prev = std::move(cur);
    }
    const auto& dist = prev[small];
    const double all = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto u_int = static_cast<std::size_t>(std::llround(r.u));
    double lower = 0.0;
    for (std::size_t u = 0; u <= u_int; ++u) lower += dist[u];
    // The null distribution is symmetric, so P(U <= min) is the smaller tail.
    r.p_value = std::min(1.0, 2.0 * lower / all);
    r.exact = true;
    return r;
  }

  const double N = static_cast<double>(total);
  const double var = nn * mm / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double diff = std::abs(r.u_a - nn * mm / 2.0);
  const double z = std::max(0.0, diff - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, 2.0 * normal_upper_tail(z));
  return r;
}

CaseMetrics evaluate_case(std::string case_id, std::span<const LabelMask> predictions, const CardiacStack& truth,
                          SliceRange range, std::span<const Structure> structures) {
  if (!truth.has_masks()) throw Error("usage", "evaluation needs ground-truth masks");
  if (static_cast<int>(predictions.size()) != truth.size())
    throw Error("shape", "case " + case_id + ": " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(truth.size()) + " slices");
  if (range.begin < 0 || range.end > truth.size() || range.size() == 0)
    throw Error("usage", "case " + case_id + ": empty evaluation range");

  const VoxelSpacing spacing{truth.spacing_row_mm, truth.spacing_col_mm, truth.thickness_mm};
  const std::span<const LabelMask> pred(predictions.data() + range.begin, range.size());
  const std::span<const LabelMask> gt(truth.masks.data() + range.begin, range.size());
  const int base = truth.base_index.value_or(-1);

  CaseMetrics out;
  out.case_id = std::move(case_id);
  out.phase = truth.phase;
  for (Structure s : structures) {
    StructureMetrics sm;
    const auto pv = structure_volume(pred, s), tv = structure_volume(gt, s);
    sm.dice = dice(pv, tv);
    sm.hausdorff_mm = hausdorff(pv, tv, spacing);
    for (std::size_t k = 0; k < tv.size(); ++k)
      if (any(tv[k])) sm.slice_apd_mm.push_back(apd(pv[k], tv[k], spacing));
    sm.pgc = sm.slice_apd_mm.empty() ? 0.0 : pgc(sm.slice_apd_mm);
    sm.presence_rate = presence_rate(pred, s);

    // std::vector<bool> has no contiguous storage, so spans need a plain array.
    const auto slices = truth.masks.size();
    std::unique_ptr<bool[]> present(new bool[slices]);
    bool anywhere = false;
    for (std::size_t k = 0; k < slices; ++k) anywhere |= present[k] = any(structure_mask(truth.masks[k], s));
    if (anywhere) {
      const auto groups = slice_groups(base, std::span<const bool>(present.get(), slices));
      for (int g = 0; g < 5; ++g)
        for (int idx : groups[g]) {
          const auto pm = structure_mask(predictions[idx], s);
          const auto tm = structure_mask(truth.masks[idx], s);
          ++sm.group_slices[g];
          if (any(pm)) ++sm.group_present[g];
          if (auto h = hausdorff(BinaryVolume{pm}, BinaryVolume{tm}, spacing)) sm.group_hausdorff_mm[g].push_back(*h);
        }
    }
    out.structures.emplace(s, std::move(sm));
  }
  return out;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::vector<double> MetricsReport::dice_samples(Structure s) const {
  std::vector<double> v;
  for (const auto& c : cases)
    if (auto it = c.structures.find(s); it != c.structures.end()) v.push_back(it->second.dice);
  return v;
}

std::vector<double> MetricsReport::hausdorff_samples(Structure s) const {
  std::vector<double> v;
  for (const auto& c : cases)
    if (auto it = c.structures.find(s); it != c.structures.end() && it->second.hausdorff_mm)
      v.push_back(*it->second.hausdorff_mm);
  return v;
}

std::size_t MetricsReport::hausdorff_missing(Structure s) const {
  std::size_t n = 0;
  for (const auto& c : cases)
    if (auto it = c.structures.find(s); it != c.structures.end() && !it->second.hausdorff_mm) ++n;
  return n;
}

std::optional<double> MetricsReport::group_presence(int group, Structure s) const {
  long slices = 0, present = 0;
  for (const auto& c : cases)
    if (auto it = c.structures.find(s); it != c.structures.end()) {
      slices += it->second.group_slices[group];
      present += it->second.group_present[group];
    }
  if (slices == 0) return std::nullopt;
  return static_cast<double>(present) / static_cast<double>(slices);
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json stat_json(const SummaryStat& s) { return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}}; }

std::vector<double> collect(const MetricsReport& r, Structure s, double StructureMetrics::*field) {
  std::vector<double> v;
  for (const auto& c : r.cases)
    if (auto it = c.structures.find(s); it != c.structures.end()) v.push_back(it->second.*field);
  return v;
}

std::vector<double> defined_apds(const MetricsReport& r, Structure s) {
  std::vector<double> v;
  for (const auto& c : r.cases)
    if (auto it = c.structures.find(s); it != c.structures.end())
      for (const auto& d : it->second.slice_apd_mm)
        if (d) v.push_back(*d);
  return v;
}

std::vector<Structure> structures_of(const MetricsReport& r) {
  std::vector<Structure> out;
  for (const auto& c : r.cases)
    for (const auto& [s, m] : c.structures)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const MetricsReport& report) {
  j = nlohmann::json::object();
  auto& cases = j["cases"] = nlohmann::json::array();
  for (const auto& c : report.cases) {
    nlohmann::json cj{{"case", c.case_id}, {"phase", std::string(to_string(c.phase))}};
    for (const auto& [s, m] : c.structures) {
      nlohmann::json apds = nlohmann::json::array();
      for (const auto& d : m.slice_apd_mm) apds.push_back(optional_json(d));
      nlohmann::json groups = nlohmann::json::array();
      for (int g = 0; g < 5; ++g)
        groups.push_back({{"group", g + 1},
                          {"slices", m.group_slices[g]},
                          {"present", m.group_present[g]},
                          {"hausdorff_2d_mm", m.group_hausdorff_mm[g]}});
      cj["structures"][std::string(to_string(s))] = {{"dice", m.dice},
                                                     {"hausdorff_mm", optional_json(m.hausdorff_mm)},
                                                     {"apd_mm", apds},
                                                     {"pgc", m.pgc},
                                                     {"presence_rate", m.presence_rate},
                                                     {"groups", groups}};
    }
    cases.push_back(std::move(cj));
  }

  auto& summary = j["summary"] = nlohmann::json::object();
  for (Structure s : structures_of(report)) {
    const auto apds = defined_apds(report, s);
    nlohmann::json groups = nlohmann::json::array();
    for (int g = 0; g < 5; ++g) {
      std::vector<double> hd;
      for (const auto& c : report.cases)
        if (auto it = c.structures.find(s); it != c.structures.end())
          hd.insert(hd.end(), it->second.group_hausdorff_mm[g].begin(), it->second.group_hausdorff_mm[g].end());
      groups.push_back({{"group", g + 1},
                        {"presence_rate", optional_json(report.group_presence(g, s))},
                        {"hausdorff_2d_mm", stat_json(summarize(hd))}});
    }
    summary[std::string(to_string(s))] = {
        {"dice", stat_json(summarize(report.dice_samples(s)))},
        {"hausdorff_mm", stat_json(summarize(report.hausdorff_samples(s)))},
        {"hausdorff_missing", report.hausdorff_missing(s)},
        {"apd_mm", stat_json(summarize(apds))},
        {"pgc", stat_json(summarize(collect(report, s, &StructureMetrics::pgc)))},
        {"presence_rate", stat_json(summarize(collect(report, s, &StructureMetrics::presence_rate)))},
        {"groups", groups}};
  }
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(8) << "struct" << std::right << std::setw(16) << "Dice" << std::setw(20)
     << "Hausdorff mm" << std::setw(18) << "APD mm" << std::setw(8) << "PGC" << std::setw(8) << "PR" << "\n";
  for (Structure s : structures_of(report)) {
    const auto d = summarize(report.dice_samples(s));
    const auto h = summarize(report.hausdorff_samples(s));
    const auto a = summarize(defined_apds(report, s));
    const auto p = summarize(collect(report, s, &StructureMetrics::pgc));
    const auto pr = summarize(collect(report, s, &StructureMetrics::presence_rate));
    auto pair = [](const SummaryStat& st, int prec) {
      std::ostringstream o;
      o << std::fixed << std::setprecision(prec) << st.mean << " (" << st.std << ")";
      return o.str();
    };
    os << std::left << std::setw(8) << to_string(s) << std::right << std::setw(16) << pair(d, 3) << std::setw(20)
       << pair(h, 2) << std::setw(18) << pair(a, 2) << std::setw(8) << p.mean << std::setw(8) << pr.mean << "\n";
  }
  os << "cases: " << report.cases.size() << "\n";
  return os.str();
}

}  // namespace cardioprop
