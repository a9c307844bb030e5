#include "cardioprop/propagate.hpp"

#include <algorithm>
#include <string>

#include "cardioprop/error.hpp"
#include "cardioprop/netbuilder.hpp"
#include "cardioprop/preprocess.hpp"

namespace cardioprop {

std::string_view to_string(PropagationMode mode) {
  switch (mode) {
    case PropagationMode::top_down: return "propagate";
    case PropagationMode::mid_start: return "mid-start";
    case PropagationMode::independent: return "independent";
  }
  return "unknown";
}

PropagationMode propagation_mode_from_string(std::string_view s) {
  if (s == "propagate" || s == "top-down") return PropagationMode::top_down;
  if (s == "mid-start") return PropagationMode::mid_start;
  if (s == "independent") return PropagationMode::independent;
  throw Error("usage", "unknown propagation mode '" + std::string(s) + "'");
}

bool segmentation_successful(const LabelMask& mask, double ratio) {
  if (!contains(mask, LVM)) return false;
  const auto open = edge_count(mask, {LVC, BG}) + edge_count(mask, {LVC, RVC});
  return static_cast<double>(open) <= ratio * static_cast<double>(edge_count(mask, {LVC, LVM}));
}

LabelMask postprocess(const LabelMask& mask, const PropagationConfig& config, int num_classes) {
  if (!segmentation_successful(mask, config.success_ratio)) return LabelMask(mask.rows, mask.cols, BG);
  LabelMask out = num_classes >= 4 ? largest_component(mask, RVC) : mask;
  if (config.acdc_rules) out = acdc_postprocess(out);
  return out;
}

LabelMask acdc_postprocess(const LabelMask& mask) {
  if (!contains(mask, LVC) || !contains(mask, LVM)) return LabelMask(mask.rows, mask.cols, BG);
  LabelMask out = largest_component(largest_component(mask, LVC), LVM);
  LabelMask repaired = out;
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      if (out(r, c) != BG) continue;
      for (int k = 0; k < 4; ++k)
        if (out.inside(r + dr[k], c + dc[k]) && out(r + dr[k], c + dc[k]) == LVC) {
          repaired(r, c) = LVM;
          break;
        }
    }
  return repaired;
}

SliceInputs make_slice_inputs(const NetworkSpec& spec, const Image& slice, const Image* context_image,
                              const LabelMask* context_mask) {
  const auto* slot = spec.find_input(kImageInput);
  if (!slot) throw Error("usage", "network has no image input");
  const int size = slot->rows;
  const std::size_t plane = static_cast<std::size_t>(size) * size;

  SliceInputs in;
  const Image x = preprocess_seg_input(slice, size);
  in.image = Tensor({1, 1, size, size});
  std::copy(x.px.begin(), x.px.end(), in.image.values().begin());

  if (const auto* ctx = spec.find_input(kContextInput)) {
    in.context = Tensor({1, ctx->channels, size, size});
    auto& v = in.context.values();
    if (context_image) {
      const Image ci = preprocess_seg_input(*context_image, size);
      std::copy(ci.px.begin(), ci.px.end(), v.begin());
    }
    if (context_mask) {
      const LabelMask m = pad_resize(*context_mask, size);
      const int classes = ctx->channels - 1;
      for (std::size_t p = 0; p < plane; ++p) {
        const int code = m.px[p];
        if (code >= classes) throw Error("usage", "context mask code " + std::to_string(code) + " needs more channels");
        v[(1 + code) * plane + p] = 1.0;
      }
    }
  }
  return in;
}

std::vector<LabelMask> segment_stack(const CardiacStack& stack, const SlicePredictor& raw_predict,
                                     const PropagationConfig& config, int num_classes, const Image* above) {
  const int n = stack.size();
  std::vector<LabelMask> out(n);
  if (n == 0) return out;
  auto predict = [&](int i, const Image* ctx_image, const LabelMask* ctx_mask) {
    out[i] = postprocess(raw_predict(stack.slices[i], ctx_image, ctx_mask), config, num_classes);
  };
  // A reset neighbour (all background) is passed on as the null mask.
  auto mask_or_null = [](const LabelMask& m) -> const LabelMask* {
    return std::any_of(m.px.begin(), m.px.end(), [](auto v) { return v != BG; }) ? &m : nullptr;
  };

  switch (config.mode) {
    case PropagationMode::independent:
      for (int i = 0; i < n; ++i) predict(i, i > 0 ? &stack.slices[i - 1] : above, nullptr);
      break;
    case PropagationMode::top_down:
      for (int i = 0; i < n; ++i)
        predict(i, i > 0 ? &stack.slices[i - 1] : above, i > 0 ? mask_or_null(out[i - 1]) : nullptr);
      break;
    case PropagationMode::mid_start: {
      const int mid = n / 2;
      predict(mid, mid > 0 ? &stack.slices[mid - 1] : above, nullptr);
      for (int i = mid + 1; i < n; ++i) predict(i, &stack.slices[i - 1], mask_or_null(out[i - 1]));
      for (int i = mid - 1; i >= 0; --i) predict(i, &stack.slices[i + 1], mask_or_null(out[i + 1]));
      break;
    }
  }
  return out;
}

std::vector<LabelMask> segment_stack(const CardiacStack& stack, Network& net, const PropagationConfig& config,
                                     const Image* above) {
  if (net.spec().kind == NetKind::roi) throw Error("usage", "segmentation needs an LVRV/LV network, got a ROI-net");
  const bool has_context = net.spec().find_input(kContextInput) != nullptr;
  if (config.mode != PropagationMode::independent && !has_context)
    throw Error("usage", "propagation mode '" + std::string(to_string(config.mode)) +
                             "' needs a network with a contextual branch");

  auto predict = [&](const Image& slice, const Image* ctx_image, const LabelMask* ctx_mask) {
    auto in = make_slice_inputs(net.spec(), slice, ctx_image, ctx_mask);
    TensorMap inputs{{kImageInput, std::move(in.image)}};
    if (has_context) inputs.emplace(kContextInput, std::move(in.context));
    const auto out = net.forward(inputs, Mode::infer);
    return unpad_resize(argmax_labels(out.at(kProbabilityOutput)), slice.rows, slice.cols);
  };
  auto masks = segment_stack(stack, predict, config, net.spec().num_classes, above);
  net.release_cache();
  return masks;
}

}  // namespace cardioprop
