#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "cardioprop/network.hpp"
#include "cardioprop/stack.hpp"

namespace cardioprop {

enum class PropagationMode { top_down, mid_start, independent };
std::string_view to_string(PropagationMode mode);
/// Accepts "propagate", "mid-start", "independent".
PropagationMode propagation_mode_from_string(std::string_view s);

struct PropagationConfig {
  PropagationMode mode = PropagationMode::top_down;
  double success_ratio = 0.5;
  bool acdc_rules = false;
};

/// LVM present and edge(LVC,BG) + edge(LVC,RVC) <= ratio * edge(LVC,LVM).
bool segmentation_successful(const LabelMask& mask, double ratio = 0.5);

/// Resets unsuccessful masks to all-BG; successful 4-class masks keep only
/// their largest RVC component.
LabelMask postprocess(const LabelMask& mask, const PropagationConfig& config = {}, int num_classes = 4);

/// Extra rules for stacks without above-base slices: both LVC and LVM must be
/// present, each is reduced to its largest component, and background touching
/// the cavity becomes myocardium.
LabelMask acdc_postprocess(const LabelMask& mask);

/// Network inputs for one slice.
struct SliceInputs {
  Tensor image;    // [1, 1, S, S]
  Tensor context;  // [1, 1 + C, S, S]; empty for kinds without context
};

/// Preprocesses a slice and its context (nullopt = null image / null mask)
/// at the network's input size.
SliceInputs make_slice_inputs(const NetworkSpec& spec, const Image& slice, const Image* context_image,
                              const LabelMask* context_mask);

/// Raw per-slice prediction (before post-processing) given the slice and its
/// context; nullptr stands for the null image / null mask.
using SlicePredictor =
    std::function<LabelMask(const Image& slice, const Image* context_image, const LabelMask* context_mask)>;

/// Drives `predict` over the stack in the configured order, post-processing
/// every prediction and feeding it forward as the next context mask.
std::vector<LabelMask> segment_stack(const CardiacStack& stack, const SlicePredictor& predict,
                                     const PropagationConfig& config, int num_classes, const Image* above = nullptr);

/// Segments every slice of `stack` (already cropped to the ROI). Predictions
/// come back at the stack's resolution and in slice order. `above` is the
/// image preceding the first slice in the full stack, if any; it serves as
/// the first context image.
std::vector<LabelMask> segment_stack(const CardiacStack& stack, Network& net, const PropagationConfig& config = {},
                                     const Image* above = nullptr);

}  // namespace cardioprop
