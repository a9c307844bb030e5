#include "cardioprop/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "cardioprop/error.hpp"
#include "cardioprop/gtadapt.hpp"
#include "cardioprop/preprocess.hpp"
#include "cardioprop/random.hpp"

namespace cardioprop {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("config", "epochs must be >= 1");
  if (batch_size < 1) throw Error("config", "batch_size must be >= 1");
  if (!(learning_rate > 0)) throw Error("config", "learning_rate must be positive");
  if (!(width_multiplier > 0)) throw Error("config", "width_multiplier must be positive");
  if (input_size < 0 || input_size % (1 << depth) != 0)
    throw Error("config", "input_size must be a multiple of 2^depth (" + std::to_string(1 << depth) + ")");
  if (depth < 2) throw Error("config", "depth must be >= 2");
  if (!(loss.epsilon > 0)) throw Error("config", "loss epsilon must be positive");
  if (!(roi_slice_fraction > 0)) throw Error("config", "roi_slice_fraction must be positive");
  augment.validate();
}

BuildOptions TrainConfig::build_options(NetKind kind) const {
  return BuildOptions{.kind = kind, .width_multiplier = width_multiplier, .input_size = input_size, .depth = depth};
}

namespace {

int input_size_for(NetKind kind, const TrainConfig& config) {
  if (config.input_size > 0) return config.input_size;
  return kind == NetKind::roi ? kRoiInputSize : kSegInputSize;
}

int base_of(const CardiacStack& s) {
  if (!s.has_masks()) throw Error("usage", "training stacks need ground-truth masks");
  return s.base_index ? *s.base_index : detect_basal_slice(s);
}

LabelMask heart_of(const LabelMask& m) {
  LabelMask h(m.rows, m.cols, 0);
  for (std::size_t i = 0; i < m.size(); ++i) h.px[i] = m.px[i] != BG ? 1 : 0;
  return h;
}

LabelMask fold_rvc(const LabelMask& m) {
  LabelMask out = m;
  for (auto& v : out.px)
    if (v == RVC) v = BG;
  return out;
}

void add_roi_samples(const TrainCase& tc, const TrainConfig& config, int size, std::vector<TrainingSample>& out) {
  const int base = base_of(tc.ed);
  const CardiacStack gt = adapt_ground_truth(tc.ed, base);
  const int n = gt.size();
  const auto range = substack_range(n, base + 1, base + 1 + config.roi_slice_fraction * n);
  PreprocessConfig pre = config.roi.preprocess;
  pre.target_size = size;
  for (int i = range.begin; i < range.end; ++i) {
    TrainingSample s;
    s.image = preprocess_roi_input(gt.slices[i], pre);
    s.target = pad_resize(heart_of(gt.masks[i]), size);
    out.push_back(std::move(s));
  }
}

void add_seg_samples(NetKind kind, const CardiacStack& raw, const RoiBox& box, int size,
                     std::vector<TrainingSample>& out) {
  const int base = base_of(raw);
  CardiacStack gt = crop(adapt_ground_truth(raw, base), box);
  if (kind == NetKind::lv)
    for (auto& m : gt.masks) m = fold_rvc(m);
  const bool context = uses_context(kind);
  const int first = kind == NetKind::lv ? std::max(base, 0) : base + 1;
  const int n = gt.size();

  std::vector<Image> images;
  std::vector<LabelMask> masks;
  for (int i = 0; i < n; ++i) {
    images.push_back(preprocess_seg_input(gt.slices[i], size));
    masks.push_back(pad_resize(gt.masks[i], size));
  }
  // Context from neighbour j of slice i; the mask is null when j lies outside
  // the segmented sub-stack [first, n).
  auto sample = [&](int i, int j) {
    TrainingSample s;
    s.image = images[i];
    s.target = masks[i];
    if (context && j >= 0 && j < n) {
      s.context_image = images[j];
      if (j >= first) s.context_mask = masks[j];
    }
    return s;
  };
  for (int i = first; i < n; ++i) {
    out.push_back(sample(i, i - 1));
    if (kind == NetKind::lvrv_midstart) {
      out.push_back(sample(i, i + 1));
      if (i == first + (n - first) / 2) {
        // The start slice is segmented with a null context mask.
        TrainingSample s = sample(i, i - 1);
        s.context_mask.reset();
        out.push_back(std::move(s));
      }
    }
  }
}

}  // namespace

std::vector<TrainingSample> build_samples(NetKind kind, const std::vector<TrainCase>& cases, const TrainConfig& config) {
  const int size = input_size_for(kind, config);
  std::vector<TrainingSample> out;
  for (const auto& tc : cases) {
    if (kind == NetKind::roi) {
      add_roi_samples(tc, config, size, out);
      continue;
    }
    const RoiBox box = roi_from_masks(adapt_ground_truth(tc.ed, base_of(tc.ed)), config.roi);
    add_seg_samples(kind, tc.ed, box, size, out);
    if (tc.es.size() > 0) add_seg_samples(kind, tc.es, box, size, out);
  }
  return out;
}

Batch make_batch(const NetworkSpec& spec, const std::vector<TrainingSample>& samples, std::span<const std::size_t> order) {
  const auto* slot = spec.find_input(kImageInput);
  if (!slot) throw Error("usage", "network has no image input");
  const int size = slot->rows;
  const int b = static_cast<int>(order.size());
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  const auto* ctx_slot = spec.find_input(kContextInput);
  const bool binary = spec.kind == NetKind::roi;
  const int classes = spec.num_classes;

  Batch batch;
  Tensor image({b, 1, size, size});
  Tensor target({b, classes, size, size});
  Tensor context;
  if (ctx_slot) context = Tensor({b, ctx_slot->channels, size, size});

  for (int k = 0; k < b; ++k) {
    const auto& s = samples.at(order[k]);
    if (s.image.rows != size || s.image.cols != size)
      throw Error("shape", "sample is " + std::to_string(s.image.rows) + "x" + std::to_string(s.image.cols) +
                               ", network expects " + std::to_string(size));
    std::copy(s.image.px.begin(), s.image.px.end(), image.values().begin() + k * plane);
    for (std::size_t p = 0; p < plane; ++p) {
      const int code = s.target.px[p];
      if (binary)
        target[k * plane + p] = code != 0 ? 1.0 : 0.0;
      else if (code < classes)
        target[(static_cast<std::size_t>(k) * classes + code) * plane + p] = 1.0;
      else
        throw Error("usage", "target code " + std::to_string(code) + " exceeds class count");
    }
    if (ctx_slot) {
      const int cc = ctx_slot->channels;
      auto base = context.values().begin() + static_cast<std::ptrdiff_t>(k) * cc * plane;
      if (s.context_image) std::copy(s.context_image->px.begin(), s.context_image->px.end(), base);
      if (s.context_mask)
        for (std::size_t p = 0; p < plane; ++p) {
          const int code = s.context_mask->px[p];
          if (code < cc - 1) base[(1 + code) * plane + p] = 1.0;
        }
    }
  }
  batch.inputs.emplace(kImageInput, std::move(image));
  if (ctx_slot) batch.inputs.emplace(kContextInput, std::move(context));
  batch.target = std::move(target);
  return batch;
}

LossValue network_loss(const NetworkSpec& spec, const Tensor& p, const Tensor& target, const LossConfig& config) {
  if (spec.kind == NetKind::roi) return dice_loss_binary(p, target, config);
  return dice_loss_multiclass(p, target, spec.num_classes, config);
}

FitResult fit(NetKind kind, const std::vector<TrainingSample>& samples, const TrainConfig& config,
              const FitProgress& progress) {
  config.validate();
  if (samples.empty()) throw Error("usage", "training set is empty");
  FitResult result;
  result.spec = build(config.build_options(kind));
  Network net(result.spec, config.seed);
  AdamState adam = make_adam_state(net.params(), AdamConfig{.learning_rate = config.learning_rate});
  Rng rng(config.seed ^ 0xa0761d6478bd642fULL);
  const int size = result.spec.find_input(kImageInput)->rows;

  std::vector<std::size_t> order(samples.size());
  std::vector<TrainingSample> augmented(samples.size());
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < samples.size(); ++i)
      augmented[i] = augment(samples[order[i]], draw_augmentation(config.augment, size, size, rng));

    double total = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
      ++batch_no;
      const std::size_t end = std::min(samples.size(), start + config.batch_size);
      idx.resize(end - start);
      std::iota(idx.begin(), idx.end(), start);
      Batch batch = make_batch(result.spec, augmented, idx);
      net.zero_grad();
      const auto out = net.forward(batch.inputs, Mode::train);
      const LossValue loss = network_loss(result.spec, out.at(kProbabilityOutput), batch.target, config.loss);
      const auto where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no);
      if (!std::isfinite(loss.value)) throw Error("nonfinite", where + ": loss is not finite");
      Tensor grad(out.at(kProbabilityOutput).shape(), loss.grad);
      net.backward({{kProbabilityOutput, std::move(grad)}});
      try {
        adam_step(adam, net.params());
      } catch (const Error& e) {
        throw Error(e.code(), where + ": " + e.what());
      }
      total += loss.value * static_cast<double>(idx.size());
      seen += idx.size();
    }
    const double mean = total / static_cast<double>(seen);
    result.loss_curve.push_back(mean);
    if (mean < best) {
      best = mean;
      result.best_epoch = epoch;
      result.best_params = net.params();
    }
    if (progress)
      progress(epoch, mean, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  net.release_cache();
  result.final_params = net.params();
  for (auto* set : {&result.final_params, &result.best_params})
    for (auto& p : set->items()) p.value.drop_grad();
  return result;
}

FitResult fit(NetKind kind, const std::vector<TrainCase>& cases, const TrainConfig& config, const FitProgress& progress) {
  config.validate();
  return fit(kind, build_samples(kind, cases, config), config, progress);
}

}  // namespace cardioprop
