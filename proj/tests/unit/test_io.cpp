#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"

#include "cardioprop/error.hpp"
#include "cardioprop/io.hpp"
#include "cardioprop/phantom.hpp"

using namespace cardioprop;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cardioprop_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CardiacStack small_stack() {
  PhantomConfig c;
  c.rows = c.cols = 64;
  c.lvc_radius_base = 5;
  c.lvc_radius_apex = 2;
  c.wall_base = 2.5;
  c.wall_apex = 2;
  c.rv_radius_base = 8;
  c.drift = 2;
  c.slices = 4;
  c.seed = 9;
  return generate(c, Phase::ES);
}

Checkpoint small_checkpoint() {
  Checkpoint ck;
  ck.spec = build(BuildOptions{.kind = NetKind::lvrv, .width_multiplier = 0.25, .input_size = 16, .depth = 2});
  ck.params = ParameterSet::initialize(ck.spec, 4);
  ck.metadata.seed = 4;
  ck.metadata.epochs = 2;
  ck.metadata.loss_curve = {-0.25, -0.5};
  ck.metadata.best_epoch = 2;
  ck.metadata.config = {{"note", "test"}};
  return ck;
}

}  // namespace

TEST_CASE("stack bundles round trip exactly") {
  TempDir tmp;
  auto s = small_stack();
  save_bundle(s, tmp.path / "b");
  const auto back = load_bundle(tmp.path / "b");
  CHECK(back == s);

  s.base_index.reset();
  s.masks.clear();
  save_bundle(s, tmp.path / "c");
  const auto back2 = load_bundle(tmp.path / "c");
  CHECK_FALSE(back2.base_index.has_value());
  CHECK_FALSE(back2.has_masks());
  CHECK(back2.slices == s.slices);
}

TEST_CASE("bundle errors name the offending slice") {
  TempDir tmp;
  save_bundle(small_stack(), tmp.path);
  fs::remove(tmp.path / "slice_002.f32");
  try {
    load_bundle(tmp.path);
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == "format");
    CHECK(std::string(e.what()).find("slice 2") != std::string::npos);
  }
  TempDir other;
  CHECK_THROWS_AS(load_bundle(other.path), Error);
}

TEST_CASE("predictions round trip with their run description") {
  TempDir tmp;
  Rng rng(3);
  std::vector<LabelMask> masks{oracle::random_mask(rng, 5, 7), oracle::random_mask(rng, 5, 7)};
  save_prediction(masks, {{"mode", "propagate"}, {"seed", 3}}, tmp.path);
  nlohmann::json run;
  CHECK(load_prediction(tmp.path, &run) == masks);
  CHECK(run["mode"] == "propagate");
}

TEST_CASE("checkpoints: save(load(f)) reproduces f byte for byte") {
  TempDir tmp;
  const auto ck = small_checkpoint();
  save_checkpoint(ck, tmp.path / "a.ckpt");
  const auto first = read_file(tmp.path / "a.ckpt");
  const auto loaded = load_checkpoint(tmp.path / "a.ckpt");
  save_checkpoint(loaded, tmp.path / "b.ckpt");
  CHECK(read_file(tmp.path / "b.ckpt") == first);
  CHECK(loaded.spec == ck.spec);
  CHECK(loaded.metadata.loss_curve == ck.metadata.loss_curve);
  CHECK(loaded.metadata.best_epoch == 2);
  CHECK(loaded.metadata.config["note"] == "test");
  // weights are stored in single precision
  const auto& w = ck.params.at("enc0.a.conv.weight");
  const auto& lw = loaded.params.at("enc0.a.conv.weight");
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(lw[i] == static_cast<double>(static_cast<float>(w[i])));
  CHECK(std::string(first.begin(), first.begin() + 8) == "CPROPCKP");
}

TEST_CASE("truncated checkpoints name the parameter") {
  auto bytes = serialize_checkpoint(small_checkpoint());
  bytes.resize(bytes.size() - 10);
  try {
    deserialize_checkpoint(bytes, "cut.ckpt");
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.code() == "format");
    const std::string msg = e.what();
    CHECK(msg.find("cut.ckpt") != std::string::npos);
    CHECK(msg.find("truncated blob for parameter 'head.s0.bias'") != std::string::npos);
  }
}

TEST_CASE("checkpoint version and magic are checked") {
  auto bytes = serialize_checkpoint(small_checkpoint());
  auto bad_version = bytes;
  bad_version[8] = 9;
  try {
    deserialize_checkpoint(bad_version);
    FAIL("expected a version error");
  } catch (const Error& e) {
    CHECK(e.code() == "version");
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), Error);
  CHECK_THROWS_AS(deserialize_checkpoint(std::vector<std::uint8_t>(5, 0)), Error);
}

TEST_CASE("training config JSON rejects unknown keys and round trips") {
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 1e-3;
  c.augment.rotation_deg = 10;
  c.roi.range_low = 0.1;
  nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  CHECK(back.epochs == 3);
  CHECK(back.learning_rate == 1e-3);
  CHECK(back.augment.rotation_deg == 10);
  CHECK(back.roi.range_low == 0.1);
  nlohmann::json again = back;
  CHECK(again == j);

  nlohmann::json typo = j;
  typo["epoch"] = 5;
  try {
    typo.get<TrainConfig>();
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == "config");
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  nlohmann::json bad_aug = j;
  bad_aug["augment"]["rotate"] = 1;
  CHECK_THROWS_AS(bad_aug.get<TrainConfig>(), Error);
  // partial configs keep defaults
  const auto partial = nlohmann::json{{"epochs", 1}}.get<TrainConfig>();
  CHECK(partial.batch_size == TrainConfig{}.batch_size);
}

TEST_CASE("cases round trip through a directory") {
  TempDir tmp;
  PhantomConfig c;
  c.rows = c.cols = 64;
  c.lvc_radius_base = 5;
  c.lvc_radius_apex = 2;
  c.wall_base = 2.5;
  c.wall_apex = 2;
  c.rv_radius_base = 8;
  c.drift = 2;
  c.slices = 3;
  auto pc = generate_case(c);
  save_case({"case_000", pc.ed, pc.es}, tmp.path / "case_000");
  const auto cases = load_cases(tmp.path);
  REQUIRE(cases.size() == 1);
  CHECK(cases[0].ed == pc.ed);
  CHECK(cases[0].es == pc.es);
  TempDir empty;
  CHECK_THROWS_AS(load_cases(empty.path), Error);
}
