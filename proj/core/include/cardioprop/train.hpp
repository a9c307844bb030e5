#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cardioprop/adam.hpp"
#include "cardioprop/augment.hpp"
#include "cardioprop/losses.hpp"
#include "cardioprop/netbuilder.hpp"
#include "cardioprop/network.hpp"
#include "cardioprop/roi.hpp"
#include "cardioprop/stack.hpp"

namespace cardioprop {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  double width_multiplier = 0.5;
  int input_size = 0;         // 0: 128 for ROI-net, 192 otherwise
  int depth = 4;
  double roi_slice_fraction = 0.4;  // ROI-net trains on S[base+1, base+1 + f N]
  AugmentConfig augment;
  LossConfig loss;
  RoiConfig roi;              // crop rule used for the segmentation nets' training data

  void validate() const;
  BuildOptions build_options(NetKind kind) const;
};

/// One subject: ED and ES stacks with raw ground truth. A missing base index
/// is filled in by detect_basal_slice.
struct TrainCase {
  std::string id;
  CardiacStack ed;
  CardiacStack es;
};

/// Preprocessed, resized samples following each network's slice policy:
///   roi:            ED, S[base+1, base+1 + 0.4N], heart vs background
///   lvrv, -noprop:  ED+ES, S[base+1, N]
///   lv:             ED+ES, S[base, N], RVC folded into BG
///   lvrv-midstart:  as lvrv, each slice once with the slice above and once
///                   with the slice below as context
/// Context masks are the adapted ground truth of the neighbour (teacher
/// forcing); the first slice of the sub-stack gets a null mask and the real
/// image above it, if any. Segmentation nets see ROI crops computed from the
/// ground-truth heart with the usual padding rule.
std::vector<TrainingSample> build_samples(NetKind kind, const std::vector<TrainCase>& cases, const TrainConfig& config);

/// Stacks a batch into network inputs and the loss target.
struct Batch {
  TensorMap inputs;
  Tensor target;
};
Batch make_batch(const NetworkSpec& spec, const std::vector<TrainingSample>& samples, std::span<const std::size_t> order);

/// Loss for a forward result, matched to the network kind (DL1, DL2 or DL3).
LossValue network_loss(const NetworkSpec& spec, const Tensor& probabilities, const Tensor& target,
                       const LossConfig& config);

struct FitResult {
  NetworkSpec spec;
  ParameterSet final_params;
  ParameterSet best_params;   // lowest epoch-mean loss
  std::vector<double> loss_curve;
  int best_epoch = 0;         // 1-based
};

using FitProgress = std::function<void(int epoch, double mean_loss, double seconds)>;

/// Seeded training run: per epoch a seeded shuffle, one augmentation draw per
/// sample, Adam with a fixed learning rate. Throws Error("nonfinite") naming
/// the epoch and batch when the loss or a gradient stops being finite.
FitResult fit(NetKind kind, const std::vector<TrainingSample>& samples, const TrainConfig& config,
              const FitProgress& progress = {});
FitResult fit(NetKind kind, const std::vector<TrainCase>& cases, const TrainConfig& config,
              const FitProgress& progress = {});

}  // namespace cardioprop
