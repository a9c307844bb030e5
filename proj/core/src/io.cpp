#include "cardioprop/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "cardioprop/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cardioprop {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'R', 'O', 'P', 'C', 'K', 'P'};

std::string indexed(const char* stem, int i, const char* ext) {
  std::ostringstream os;
  os << stem << '_' << std::setw(3) << std::setfill('0') << i << ext;
  return os.str();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return v;
}
void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error("format", path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file(path, text.data(), text.size());
}

template <class T>
T field(const json& j, const char* key, const fs::path& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("format", where.string() + ": missing or invalid '" + key + "'");
  }
}

void write_mask(const fs::path& path, const LabelMask& m) { write_file(path, m.px.data(), m.px.size()); }

LabelMask read_mask(const fs::path& path, int rows, int cols, int index) {
  if (!fs::exists(path))
    throw Error("format", "missing mask file " + path.filename().string() + " (slice " + std::to_string(index) + ")");
  auto bytes = read_file(path);
  const std::size_t want = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != want)
    throw Error("format", path.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(want));
  LabelMask m(rows, cols);
  std::copy(bytes.begin(), bytes.end(), m.px.begin());
  for (auto v : m.px)
    if (v >= kNumClasses) throw Error("format", path.string() + ": invalid class code " + std::to_string(v));
  return m;
}

}  // namespace

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error("io", "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Stack bundles

void save_bundle(const CardiacStack& stack, const fs::path& dir) {
  stack.validate();
  fs::create_directories(dir);
  json m;
  m["format"] = kBundleFormat;
  m["version"] = kBundleVersion;
  m["rows"] = stack.rows();
  m["cols"] = stack.cols();
  m["slices"] = stack.size();
  m["spacing_mm"] = {stack.spacing_row_mm, stack.spacing_col_mm};
  m["thickness_mm"] = stack.thickness_mm;
  m["phase"] = std::string(to_string(stack.phase));
  m["base_index"] = stack.base_index ? json(*stack.base_index) : json("unknown");
  m["byte_order"] = "little";
  m["has_masks"] = stack.has_masks();
  write_json(dir / "manifest.json", m);

  std::vector<std::uint8_t> buf;
  for (int i = 0; i < stack.size(); ++i) {
    buf.clear();
    for (float v : stack.slices[i].px) put_f32(buf, v);
    write_file(dir / indexed("slice", i, ".f32"), buf.data(), buf.size());
    if (stack.has_masks()) write_mask(dir / indexed("mask", i, ".u8"), stack.masks[i]);
  }
}

CardiacStack load_bundle(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw Error("io", "no manifest.json in " + dir.string());
  const json m = read_json(mpath);
  if (field<std::string>(m, "format", mpath) != kBundleFormat)
    throw Error("format", mpath.string() + ": not a stack bundle");
  if (const int v = field<int>(m, "version", mpath); v != kBundleVersion)
    throw Error("version", mpath.string() + ": unsupported bundle version " + std::to_string(v));
  if (field<std::string>(m, "byte_order", mpath) != "little")
    throw Error("format", mpath.string() + ": only little-endian bundles are supported");

  const int rows = field<int>(m, "rows", mpath), cols = field<int>(m, "cols", mpath);
  const int n = field<int>(m, "slices", mpath);
  if (rows <= 0 || cols <= 0 || n <= 0) throw Error("format", mpath.string() + ": non-positive dimensions");
  const auto spacing = field<std::vector<double>>(m, "spacing_mm", mpath);
  if (spacing.size() != 2) throw Error("format", mpath.string() + ": spacing_mm needs [row, col]");

  CardiacStack s;
  s.spacing_row_mm = spacing[0];
  s.spacing_col_mm = spacing[1];
  s.thickness_mm = field<double>(m, "thickness_mm", mpath);
  s.phase = phase_from_string(field<std::string>(m, "phase", mpath));
  const json& b = m.at("base_index");
  if (b.is_number_integer())
    s.base_index = b.get<int>();
  else if (!(b.is_string() && b.get<std::string>() == "unknown"))
    throw Error("format", mpath.string() + ": base_index must be an integer or \"unknown\"");
  const bool has_masks = field<bool>(m, "has_masks", mpath);

  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  for (int i = 0; i < n; ++i) {
    const fs::path p = dir / indexed("slice", i, ".f32");
    if (!fs::exists(p))
      throw Error("format", "missing slice file " + p.filename().string() + " (slice " + std::to_string(i) + " of " +
                                std::to_string(n) + ")");
    const auto bytes = read_file(p);
    if (bytes.size() != plane * 4)
      throw Error("format", p.string() + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                                std::to_string(plane * 4));
    Image img(rows, cols);
    for (std::size_t k = 0; k < plane; ++k) img.px[k] = get_f32(bytes.data() + 4 * k);
    s.slices.push_back(std::move(img));
    if (has_masks) s.masks.push_back(read_mask(dir / indexed("mask", i, ".u8"), rows, cols, i));
  }
  s.validate();
  return s;
}

void save_prediction(const std::vector<LabelMask>& masks, const json& run, const fs::path& dir) {
  fs::create_directories(dir);
  json m = run;
  m["format"] = kPredictionFormat;
  m["version"] = kBundleVersion;
  m["slices"] = masks.size();
  m["rows"] = masks.empty() ? 0 : masks.front().rows;
  m["cols"] = masks.empty() ? 0 : masks.front().cols;
  write_json(dir / "manifest.json", m);
  for (std::size_t i = 0; i < masks.size(); ++i) write_mask(dir / indexed("mask", static_cast<int>(i), ".u8"), masks[i]);
}

std::vector<LabelMask> load_prediction(const fs::path& dir, json* run) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw Error("io", "no manifest.json in " + dir.string());
  const json m = read_json(mpath);
  if (field<std::string>(m, "format", mpath) != kPredictionFormat)
    throw Error("format", mpath.string() + ": not a prediction directory");
  const int rows = field<int>(m, "rows", mpath), cols = field<int>(m, "cols", mpath);
  const int n = field<int>(m, "slices", mpath);
  std::vector<LabelMask> masks;
  for (int i = 0; i < n; ++i) masks.push_back(read_mask(dir / indexed("mask", i, ".u8"), rows, cols, i));
  if (run) *run = m;
  return masks;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  ck.params.validate_against(ck.spec);
  json header;
  header["spec"] = ck.spec;
  header["metadata"] = {{"seed", ck.metadata.seed},
                        {"epochs", ck.metadata.epochs},
                        {"loss_curve", ck.metadata.loss_curve},
                        {"best_epoch", ck.metadata.best_epoch},
                        {"role", ck.metadata.role},
                        {"config", ck.metadata.config}};
  json blobs = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : ck.params.items()) {
    blobs.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}, {"count", p.value.size()}});
    offset += p.value.size() * 4;
  }
  header["blobs"] = blobs;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& p : ck.params.items())
    for (double v : p.value.values()) put_f32(out, static_cast<float>(v));
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 20 || !std::equal(kMagic, kMagic + 8, bytes.begin()))
    throw Error("format", origin + ": not a checkpoint file");
  const std::uint32_t version = get_u32(bytes.data() + 8);
  if (version != kCheckpointVersion)
    throw Error("version", origin + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t hlen = get_u64(bytes.data() + 12);
  if (hlen > bytes.size() - 20) throw Error("format", origin + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const json::exception& e) {
    throw Error("format", origin + ": bad header: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.spec = header.at("spec").get<NetworkSpec>();
    const json& md = header.at("metadata");
    ck.metadata.seed = md.at("seed").get<std::uint64_t>();
    ck.metadata.epochs = md.at("epochs").get<int>();
    ck.metadata.loss_curve = md.at("loss_curve").get<std::vector<double>>();
    ck.metadata.best_epoch = md.at("best_epoch").get<int>();
    ck.metadata.role = md.at("role").get<std::string>();
    ck.metadata.config = md.at("config");
  } catch (const json::exception& e) {
    throw Error("format", origin + ": bad header: " + e.what());
  }

  const std::size_t data_start = 20 + hlen;
  const auto decls = parameter_decls(ck.spec);
  std::map<std::string, const json*> table;
  for (const auto& b : header.at("blobs")) {
    const auto name = b.at("name").get<std::string>();
    if (!table.emplace(name, &b).second) throw Error("format", origin + ": duplicate blob '" + name + "'");
  }
  std::vector<Parameter> params;
  for (const auto& d : decls) {
    auto it = table.find(d.name);
    if (it == table.end()) throw Error("format", origin + ": no blob for parameter '" + d.name + "'");
    const json& b = *it->second;
    const auto shape = b.at("shape").get<std::vector<int>>();
    const auto count = b.at("count").get<std::uint64_t>();
    const auto offset = b.at("offset").get<std::uint64_t>();
    if (shape != d.shape || count != shape_volume(d.shape))
      throw Error("format", origin + ": blob '" + d.name + "' has shape " + shape_string(shape) + ", expected " +
                                shape_string(d.shape));
    if (data_start + offset + count * 4 > bytes.size())
      throw Error("format", origin + ": truncated blob for parameter '" + d.name + "'");
    Tensor t(d.shape);
    const std::uint8_t* p = bytes.data() + data_start + offset;
    for (std::size_t k = 0; k < count; ++k) t[k] = get_f32(p + 4 * k);
    params.push_back({d.name, std::move(t), d.trainable});
    table.erase(it);
  }
  if (!table.empty()) throw Error("format", origin + ": unexpected blob '" + table.begin()->first + "'");
  ck.params = ParameterSet(std::move(params));
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  write_file(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const fs::path& path) { return deserialize_checkpoint(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Configuration

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw Error("config", std::string(what) + " must be a JSON object");
  std::set<std::string> ok(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw Error("config", std::string(what) + ": unknown key '" + it.key() + "'");
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config", std::string("invalid value for '") + key + "'");
  }
}

}  // namespace

void to_json(json& j, const AugmentConfig& c) {
  j = {{"enabled", c.enabled},
       {"rotation_deg", c.rotation_deg},
       {"shift_fraction", c.shift_fraction},
       {"zoom_min", c.zoom_min},
       {"zoom_max", c.zoom_max},
       {"flip_h_probability", c.flip_h_probability},
       {"flip_v_probability", c.flip_v_probability}};
}

void from_json(const json& j, AugmentConfig& c) {
  reject_unknown(j, {"enabled", "rotation_deg", "shift_fraction", "zoom_min", "zoom_max", "flip_h_probability",
                     "flip_v_probability"},
                 "augment");
  maybe(j, "enabled", c.enabled);
  maybe(j, "rotation_deg", c.rotation_deg);
  maybe(j, "shift_fraction", c.shift_fraction);
  maybe(j, "zoom_min", c.zoom_min);
  maybe(j, "zoom_max", c.zoom_max);
  maybe(j, "flip_h_probability", c.flip_h_probability);
  maybe(j, "flip_v_probability", c.flip_v_probability);
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"seed", c.seed},
       {"width_multiplier", c.width_multiplier},
       {"input_size", c.input_size},
       {"depth", c.depth},
       {"roi_slice_fraction", c.roi_slice_fraction},
       {"loss_epsilon", c.loss.epsilon},
       {"roi_range", {c.roi.range_low, c.roi.range_high}},
       {"roi_pad_fraction", c.roi.pad_fraction},
       {"augment", c.augment}};
}

void from_json(const json& j, TrainConfig& c) {
  reject_unknown(j, {"epochs", "batch_size", "learning_rate", "seed", "width_multiplier", "input_size", "depth",
                     "roi_slice_fraction", "loss_epsilon", "roi_range", "roi_pad_fraction", "augment"},
                 "train config");
  maybe(j, "epochs", c.epochs);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "seed", c.seed);
  maybe(j, "width_multiplier", c.width_multiplier);
  maybe(j, "input_size", c.input_size);
  maybe(j, "depth", c.depth);
  maybe(j, "roi_slice_fraction", c.roi_slice_fraction);
  maybe(j, "loss_epsilon", c.loss.epsilon);
  maybe(j, "roi_pad_fraction", c.roi.pad_fraction);
  if (j.contains("roi_range")) {
    std::vector<double> r;
    maybe(j, "roi_range", r);
    if (r.size() != 2) throw Error("config", "roi_range needs [low, high]");
    c.roi.range_low = r[0];
    c.roi.range_high = r[1];
  }
  if (j.contains("augment")) c.augment = j.at("augment").get<AugmentConfig>();
  c.validate();
}

TrainConfig load_train_config(const fs::path& path) { return read_json(path).get<TrainConfig>(); }

std::vector<TrainCase> load_cases(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("io", "not a directory: " + dir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "ed" / "manifest.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw Error("io", "no cases (*/ed/manifest.json) under " + dir.string());
  std::vector<TrainCase> cases;
  for (const auto& d : dirs) {
    TrainCase c;
    c.id = d.filename().string();
    c.ed = load_bundle(d / "ed");
    c.es = fs::exists(d / "es" / "manifest.json") ? load_bundle(d / "es") : CardiacStack{};
    cases.push_back(std::move(c));
  }
  return cases;
}

void save_case(const TrainCase& c, const fs::path& dir) {
  save_bundle(c.ed, dir / "ed");
  if (c.es.size() > 0) save_bundle(c.es, dir / "es");
}

}  // namespace cardioprop
