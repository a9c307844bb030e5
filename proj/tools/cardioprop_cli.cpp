// Command-line front end: phantom, train, segment, evaluate, adapt-gt, grad-check.
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cardioprop/error.hpp"
#include "cardioprop/gradcheck.hpp"
#include "cardioprop/gtadapt.hpp"
#include "cardioprop/io.hpp"
#include "cardioprop/metrics.hpp"
#include "cardioprop/phantom.hpp"
#include "cardioprop/propagate.hpp"
#include "cardioprop/random.hpp"
#include "cardioprop/roi.hpp"
#include "cardioprop/train.hpp"

namespace fs = std::filesystem;
using namespace cardioprop;
using nlohmann::json;

namespace {

std::string case_name(int i) {
  std::ostringstream s;
  s << "case_" << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

// ---------------------------------------------------------------- phantom

struct PhantomArgs {
  int count = 10;
  std::string out;
  std::uint64_t seed = 0;
  int size = 128;
  int slices = 10;
  int above_base = 1;
  bool distractor = false;
  double noise = 0.05;
  double jitter = 0.7;
};

int run_phantom(const PhantomArgs& a) {
  if (a.count < 1) throw Error("usage", "--count must be >= 1");
  Rng seeds(a.seed);
  for (int i = 0; i < a.count; ++i) {
    PhantomConfig c;
    c.rows = c.cols = a.size;
    // Anatomy is specified for 128 px; scale it with the image.
    const double k = a.size / 128.0;
    for (double* v : {&c.lvc_radius_base, &c.lvc_radius_apex, &c.wall_base, &c.wall_apex, &c.rv_radius_base, &c.drift})
      *v *= k;
    c.lvc_radius_apex = std::max(c.lvc_radius_apex, 1.0);
    c.wall_base = std::max(c.wall_base, 1.5);
    c.wall_apex = std::max(c.wall_apex, 1.5);
    c.slices = a.slices;
    c.above_base_slices = a.above_base;
    c.distractor = a.distractor;
    c.noise = a.noise;
    c.jitter = a.jitter;
    c.seed = seeds.fork();
    auto pc = generate_case(c);
    save_case({case_name(i), std::move(pc.ed), std::move(pc.es)}, fs::path(a.out) / case_name(i));
  }
  std::cout << "wrote " << a.count << " phantom cases to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string net = "lvrv";
  std::string data;
  std::string config;
  std::string out;
  std::string best;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<double> width;
  std::optional<int> input_size;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const NetKind kind = net_kind_from_string(a.net);
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.width) cfg.width_multiplier = *a.width;
  if (a.input_size) cfg.input_size = *a.input_size;
  cfg.validate();

  const auto cases = load_cases(a.data);
  const auto samples = build_samples(kind, cases, cfg);
  std::cout << "training " << to_string(kind) << " on " << cases.size() << " cases (" << samples.size()
            << " samples), seed " << cfg.seed << "\n";
  const auto result = fit(kind, samples, cfg, [&](int epoch, double loss, double seconds) {
    if (!a.quiet)
      std::cout << "epoch " << epoch << "/" << cfg.epochs << "  loss " << std::fixed << std::setprecision(5) << loss
                << "  " << std::setprecision(1) << seconds << "s" << std::defaultfloat << std::endl;
  });

  Checkpoint ck{result.spec, result.final_params, {}};
  ck.metadata.seed = cfg.seed;
  ck.metadata.epochs = cfg.epochs;
  ck.metadata.loss_curve = result.loss_curve;
  ck.metadata.best_epoch = result.best_epoch;
  ck.metadata.config = cfg;
  save_checkpoint(ck, a.out);
  if (!a.best.empty()) {
    ck.params = result.best_params;
    ck.metadata.role = "best";
    save_checkpoint(ck, a.best);
  }
  std::cout << "final loss " << result.loss_curve.back() << ", best epoch " << result.best_epoch << "; wrote " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- segment

struct SegmentArgs {
  std::string net;
  std::string roi_net;
  std::string in;
  std::string roi_bundle;
  std::string out;
  std::string mode = "propagate";
  std::vector<double> roi_range{0.2, 0.6};
  std::vector<int> roi_box;
  std::optional<int> first;
  bool acdc = false;
};

int run_segment(const SegmentArgs& a) {
  const CardiacStack stack = load_bundle(a.in);
  const Checkpoint ck = load_checkpoint(a.net);
  Network net(ck.spec, ck.params);
  PropagationConfig pcfg;
  pcfg.mode = propagation_mode_from_string(a.mode);
  pcfg.acdc_rules = a.acdc;
  if (a.roi_range.size() != 2) throw Error("usage", "--roi-range takes lo,hi");

  RoiBox box;
  if (a.roi_box.size() == 3) {
    box = {a.roi_box[0], a.roi_box[1], a.roi_box[2]};
  } else if (!a.roi_box.empty()) {
    throw Error("usage", "--roi takes row,col,side");
  } else if (!a.roi_net.empty()) {
    const Checkpoint rk = load_checkpoint(a.roi_net);
    Network roi(rk.spec, rk.params);
    RoiConfig rc;
    rc.range_low = a.roi_range[0];
    rc.range_high = a.roi_range[1];
    box = determine_roi(a.roi_bundle.empty() ? stack : load_bundle(a.roi_bundle), roi, rc);
  } else {
    throw Error("usage", "segment needs --roi-net or --roi");
  }

  int first = 0;
  if (a.first) first = *a.first;
  else if (stack.base_index) first = ck.spec.kind == NetKind::lv ? std::max(*stack.base_index, 0) : *stack.base_index + 1;
  if (first < 0 || first >= stack.size()) throw Error("usage", "first segmented slice " + std::to_string(first) + " outside the stack");

  const CardiacStack cropped = crop(stack, box);
  const CardiacStack sub = substack(cropped, SliceRange{first, cropped.size()});
  const Image* above = first > 0 ? &cropped.slices[first - 1] : nullptr;
  const auto masks = segment_stack(sub, net, pcfg, above);

  std::vector<LabelMask> full(stack.size(), LabelMask(stack.rows(), stack.cols(), BG));
  for (std::size_t k = 0; k < masks.size(); ++k) full[first + k] = uncrop_raster(masks[k], box, stack.rows(), stack.cols());
  const json run{{"command", "segment"},
                 {"input", a.in},
                 {"network", a.net},
                 {"network_kind", std::string(to_string(ck.spec.kind))},
                 {"roi_network", a.roi_net},
                 {"mode", std::string(to_string(pcfg.mode))},
                 {"acdc_rules", pcfg.acdc_rules},
                 {"roi", {{"row", box.row}, {"col", box.col}, {"side", box.side}}},
                 {"first_slice", first}};
  save_prediction(full, run, a.out);
  std::cout << "segmented slices " << first << ".." << stack.size() - 1 << " in ROI (" << box.row << ", " << box.col
            << ", side " << box.side << "); wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred;
  std::string truth;
  std::string out;
  std::optional<int> first;
  bool no_adapt = false;
};

CaseMetrics evaluate_pair(const std::string& id, const fs::path& pred_dir, const fs::path& truth_dir,
                          const EvaluateArgs& a) {
  json run;
  const auto pred = load_prediction(pred_dir, &run);
  CardiacStack truth = load_bundle(truth_dir);
  if (!truth.has_masks()) throw Error("usage", truth_dir.string() + " has no ground-truth masks");
  const int base = truth.base_index ? *truth.base_index : detect_basal_slice(truth);
  if (!a.no_adapt) truth = adapt_ground_truth(truth, base);
  truth.base_index = base;
  int first = base + 1;
  if (a.first) first = *a.first;
  else if (run.contains("first_slice")) first = run["first_slice"].get<int>();
  first = std::clamp(first, 0, truth.size() - 1);
  return evaluate_case(id, pred, truth, SliceRange{first, truth.size()});
}

int run_evaluate(const EvaluateArgs& a) {
  MetricsReport report;
  const fs::path truth(a.truth), pred(a.pred);
  if (fs::exists(truth / "manifest.json")) {
    report.cases.push_back(evaluate_pair(truth.filename().string(), pred, truth, a));
  } else {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(truth))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs)
      for (const char* phase : {"ed", "es"})
        if (fs::exists(d / phase / "manifest.json"))
          report.cases.push_back(evaluate_pair(d.filename().string() + "/" + phase, pred / d.filename() / phase, d / phase, a));
    if (report.cases.empty()) throw Error("io", "no ground-truth bundles under " + truth.string());
  }
  const json j = report;
  const std::string text = j.dump(2) + "\n";
  write_file(a.out, text.data(), text.size());
  std::cout << format_table(report);
  return 0;
}

// ---------------------------------------------------------------- adapt-gt

int run_adapt(const std::string& in, const std::string& out, std::optional<int> base_arg) {
  const CardiacStack s = load_bundle(in);
  if (!s.has_masks()) throw Error("usage", in + " has no masks to adapt");
  const int base = base_arg ? *base_arg : detect_basal_slice(s);
  if (base < -1 || base >= s.size()) throw Error("usage", "base index " + std::to_string(base) + " outside the stack");
  CardiacStack adapted = adapt_ground_truth(s, base);
  adapted.base_index = base;
  save_bundle(adapted, out);
  std::cout << "basal slice " << base << (base_arg ? " (given)" : " (detected)") << "; wrote " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------- grad-check

int run_grad_check(std::uint64_t seed, int shapes, double tolerance) {
  const auto report = run_gradient_check(seed, shapes);
  for (const auto& c : report.cases)
    std::cout << std::left << std::setw(28) << c.what << std::right << std::setw(6) << c.entries << "  "
              << std::scientific << std::setprecision(2) << c.max_relative_error << std::defaultfloat << "\n";
  std::cout << "worst relative error " << report.worst() << " (tolerance " << tolerance << ")\n";
  if (!(report.worst() < tolerance))
    throw Error("gradient", "finite-difference mismatch " + std::to_string(report.worst()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardiac short-axis segmentation with slice-to-slice propagation"};
  app.require_subcommand(1);

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic ED/ES phantom cases");
  phantom->add_option("--count", pa.count, "Number of cases")->capture_default_str();
  phantom->add_option("--out", pa.out, "Output directory (case_NNN/{ed,es})")->required();
  phantom->add_option("--seed", pa.seed, "Random seed")->capture_default_str();
  phantom->add_option("--size", pa.size, "Image rows and columns")->capture_default_str();
  phantom->add_option("--slices", pa.slices, "Slices per stack")->capture_default_str();
  phantom->add_option("--above-base", pa.above_base, "Slices above the base (= base index)")->capture_default_str();
  phantom->add_flag("--distractor", pa.distractor, "Add a heart-like structure near the apex");
  phantom->add_option("--noise", pa.noise, "Noise level relative to blood intensity")->capture_default_str();
  phantom->add_option("--jitter", pa.jitter, "Per-slice misalignment in pixels")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a network on phantom cases");
  train->add_option("--net", ta.net, "roi|lvrv|lv|lvrv-noprop|lvrv-midstart")->capture_default_str();
  train->add_option("--data", ta.data, "Directory of cases")->required();
  train->add_option("--config", ta.config, "Training configuration JSON");
  train->add_option("--out", ta.out, "Final checkpoint path")->required();
  train->add_option("--best", ta.best, "Also write the lowest-loss checkpoint here");
  train->add_option("--seed", ta.seed, "Random seed (overrides the config)");
  train->add_option("--epochs", ta.epochs, "Epochs (overrides the config)");
  train->add_option("--lr", ta.lr, "Learning rate (overrides the config)");
  train->add_option("--batch-size", ta.batch, "Batch size (overrides the config)");
  train->add_option("--width", ta.width, "Width multiplier (overrides the config)");
  train->add_option("--input-size", ta.input_size, "Network input size (overrides the config)");
  train->add_flag("--quiet", ta.quiet, "No per-epoch output");

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Segment one stack bundle");
  segment->add_option("--net", sa.net, "Segmentation checkpoint")->required();
  segment->add_option("--roi-net", sa.roi_net, "ROI-net checkpoint");
  segment->add_option("--roi", sa.roi_box, "Fixed ROI row,col,side instead of a ROI-net")->delimiter(',');
  segment->add_option("--roi-bundle", sa.roi_bundle, "ED bundle used to find the ROI (default: the input)");
  segment->add_option("--roi-range", sa.roi_range, "ROI sub-stack lo,hi as fractions of N")->delimiter(',')->capture_default_str();
  segment->add_option("--in", sa.in, "Input bundle")->required();
  segment->add_option("--out", sa.out, "Prediction directory")->required();
  segment->add_option("--mode", sa.mode, "propagate|mid-start|independent")->capture_default_str();
  segment->add_option("--first", sa.first, "First segmented slice (default: below the base)");
  segment->add_flag("--acdc", sa.acdc, "Apply the extra rules for stacks without above-base slices");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate->add_option("--pred", ea.pred, "Prediction directory (or parent of case_NNN/{ed,es})")->required();
  evaluate->add_option("--truth", ea.truth, "Ground-truth bundle (or parent of case_NNN/{ed,es})")->required();
  evaluate->add_option("--out", ea.out, "Report JSON path")->required();
  evaluate->add_option("--first", ea.first, "First evaluated slice (default: from the run manifest)");
  evaluate->add_flag("--no-adapt", ea.no_adapt, "Compare against the raw instead of the adapted ground truth");

  std::string adapt_in, adapt_out;
  std::optional<int> adapt_base;
  auto* adapt = app.add_subcommand("adapt-gt", "Detect the basal slice and adapt ground-truth masks");
  adapt->add_option("--in", adapt_in, "Input bundle")->required();
  adapt->add_option("--out", adapt_out, "Output bundle")->required();
  adapt->add_option("--base", adapt_base, "Use this basal slice instead of detecting it");

  std::uint64_t gc_seed = 0;
  int gc_shapes = 2;
  double gc_tol = 1e-4;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of every layer kind and loss");
  grad->add_option("--seed", gc_seed, "Random seed")->capture_default_str();
  grad->add_option("--shapes", gc_shapes, "Random shapes per layer kind and loss")->capture_default_str();
  grad->add_option("--tolerance", gc_tol, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*phantom) return run_phantom(pa);
    if (*train) return run_train(ta);
    if (*segment) return run_segment(sa);
    if (*evaluate) return run_evaluate(ea);
    if (*adapt) return run_adapt(adapt_in, adapt_out, adapt_base);
    if (*grad) return run_grad_check(gc_seed, gc_shapes, gc_tol);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << e.code() << ": " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
