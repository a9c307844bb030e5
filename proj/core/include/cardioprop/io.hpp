#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioprop/network.hpp"
#include "cardioprop/propagate.hpp"
#include "cardioprop/roi.hpp"
#include "cardioprop/stack.hpp"
#include "cardioprop/train.hpp"

namespace cardioprop {

inline constexpr const char* kBundleFormat = "cardioprop-stack";
inline constexpr int kBundleVersion = 1;
inline constexpr const char* kPredictionFormat = "cardioprop-prediction";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Stack bundle: <dir>/manifest.json plus slice_NNN.f32 (little-endian
/// float32, row-major) and, with ground truth, mask_NNN.u8 per slice.
void save_bundle(const CardiacStack& stack, const std::filesystem::path& dir);
CardiacStack load_bundle(const std::filesystem::path& dir);

/// Predicted masks: <dir>/manifest.json (run description) plus mask_NNN.u8.
void save_prediction(const std::vector<LabelMask>& masks, const nlohmann::json& run,
                     const std::filesystem::path& dir);
std::vector<LabelMask> load_prediction(const std::filesystem::path& dir, nlohmann::json* run = nullptr);

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  std::vector<double> loss_curve;
  int best_epoch = 0;
  std::string role = "final";  // "final" or "best"
  nlohmann::json config = nlohmann::json::object();
};

struct Checkpoint {
  NetworkSpec spec;
  ParameterSet params;
  CheckpointMetadata metadata;
};

/// Binary layout: 8-byte magic, u32 version, u64 header length, UTF-8 JSON
/// header (spec, metadata, blob table), then the float32 blobs back to back.
/// Weights are stored in single precision, so save(load(f)) reproduces f
/// byte for byte.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "checkpoint");

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
/// Unknown keys are rejected so that typos do not silently fall back to defaults.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Cases written by `phantom`: <dir>/case_NNN/{ed,es}.
std::vector<TrainCase> load_cases(const std::filesystem::path& dir);
void save_case(const TrainCase& c, const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const void* data, std::size_t size);

}  // namespace cardioprop
