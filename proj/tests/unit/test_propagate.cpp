#include <algorithm>

#include "doctest.h"
#include "oracles.hpp"

#include "cardioprop/error.hpp"
#include "cardioprop/netbuilder.hpp"
#include "cardioprop/propagate.hpp"

using namespace cardioprop;

namespace {

// 7x7 LVC block inside a one-pixel LVM ring: 5x5 cavity, 20 LVC-LVM edges.
LabelMask ring(int rows = 12, int cols = 12, int top = 2, int left = 2) {
  LabelMask m(rows, cols, BG);
  for (int r = top; r < top + 7; ++r)
    for (int c = left; c < left + 7; ++c)
      m(r, c) = (r == top || r == top + 6 || c == left || c == left + 6) ? LVM : LVC;
  return m;
}

struct Call {
  int slice;            // index recovered from the slice's marker pixel
  int context_image;    // -1 = null image, -2 = the `above` image
  bool context_mask;
};

// Each image carries its index in pixel (0, 0); `above` carries -2.
CardiacStack marked_stack(int n) {
  CardiacStack s;
  for (int i = 0; i < n; ++i) {
    Image im(12, 12, 0.0f);
    im(0, 0) = static_cast<float>(i);
    s.slices.push_back(im);
  }
  return s;
}

}  // namespace

TEST_CASE("success rule examples") {
  const auto closed = ring();
  CHECK(segmentation_successful(closed));
  // 1 open edge against 19 LVC-LVM edges: 1 <= 9.5
  auto gap = closed;
  gap(2, 5) = BG;
  CHECK(edge_count(gap, {LVC, BG}) == 1);
  CHECK(segmentation_successful(gap));
  // no LVM at all
  LabelMask cavity_only(8, 8, BG);
  cavity_only(3, 3) = LVC;
  CHECK_FALSE(segmentation_successful(cavity_only));
  CHECK_FALSE(segmentation_successful(LabelMask(8, 8, BG)));
  // LVM only: 0 <= 0
  LabelMask myo(8, 8, BG);
  myo(2, 2) = LVM;
  CHECK(segmentation_successful(myo));
  // cavity mostly exposed
  LabelMask open = ring();
  for (int c = 2; c < 9; ++c) open(2, c) = BG, open(8, c) = RVC;
  CHECK_FALSE(segmentation_successful(open));
  // the ratio is configurable
  CHECK(segmentation_successful(open, 10.0));
}

TEST_CASE("success rule agrees with a direct evaluator and post-processing is idempotent") {
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    const auto m = t % 2 ? oracle::random_blobs(rng, 16, 16) : oracle::random_mask(rng, 6, 6);
    CHECK(segmentation_successful(m) == oracle::successful(m));
    const auto once = postprocess(m);
    CHECK(postprocess(once) == once);
    if (!oracle::successful(m)) CHECK(once == LabelMask(m.rows, m.cols, BG));
    else CHECK(once == oracle::keep_largest(m, RVC));
  }
}

TEST_CASE("post-processing keeps the largest RV component only for 4-class masks") {
  auto m = ring(16, 16);
  m(14, 14) = RVC;
  m(14, 12) = RVC;
  m(13, 12) = RVC;
  const auto four = postprocess(m);
  CHECK(four(14, 14) == BG);
  CHECK(four(14, 12) == RVC);
  CHECK(postprocess(m, {}, 3)(14, 14) == RVC);
}

TEST_CASE("ACDC rules") {
  // background touching the cavity becomes myocardium
  auto m = ring();
  m(2, 5) = BG;
  const auto fixed = acdc_postprocess(m);
  CHECK(fixed(2, 5) == LVM);
  CHECK(fixed(1, 5) == BG);
  CHECK(edge_count(fixed, {LVC, BG}) == 0);
  // stray cavity and myocardium fragments are dropped
  auto extra = ring(16, 16);
  extra(14, 14) = LVC;
  extra(12, 14) = LVM;
  const auto cleaned = acdc_postprocess(extra);
  CHECK(cleaned(12, 14) == BG);
  CHECK(cleaned(14, 14) == BG);
  // missing either structure clears the slice
  LabelMask no_lvc = ring();
  for (auto& v : no_lvc.px)
    if (v == LVC) v = BG;
  CHECK(acdc_postprocess(no_lvc) == LabelMask(12, 12, BG));
  // applied after the success rule
  PropagationConfig cfg;
  cfg.acdc_rules = true;
  CHECK(postprocess(m, cfg)(2, 5) == LVM);
  // idempotent
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto r = oracle::random_blobs(rng, 14, 14);
    const auto once = postprocess(r, cfg);
    CHECK(postprocess(once, cfg) == once);
  }
}

TEST_CASE("mode names") {
  for (auto m : {PropagationMode::top_down, PropagationMode::mid_start, PropagationMode::independent})
    CHECK(propagation_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(propagation_mode_from_string("sideways"), Error);
}

TEST_CASE("top-down propagation feeds each result forward") {
  const auto stack = marked_stack(5);
  Image above(12, 12, 0.0f);
  above(0, 0) = -2.0f;
  std::vector<Call> calls;
  // predictor succeeds everywhere except slice 2
  auto predictor = [&](const Image& s, const Image* ci, const LabelMask* cm) {
    const int i = static_cast<int>(s(0, 0));
    calls.push_back({i, ci ? static_cast<int>((*ci)(0, 0)) : -1, cm != nullptr});
    if (cm) CHECK(*cm == ring());
    LabelMask out = i == 2 ? LabelMask(12, 12, LVC) : ring();
    return out;
  };
  const auto masks = segment_stack(stack, predictor, {}, 4, &above);
  REQUIRE(masks.size() == 5);
  REQUIRE(calls.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(calls[i].slice == i);
  CHECK(calls[0].context_image == -2);
  CHECK_FALSE(calls[0].context_mask);
  CHECK(calls[1].context_image == 0);
  CHECK(calls[1].context_mask);
  CHECK(calls[3].context_mask == false);  // slice 2 was reset, so slice 3 gets the null mask
  CHECK(calls[4].context_mask);
  CHECK(masks[2] == LabelMask(12, 12, BG));
  CHECK(masks[1] == ring());

  calls.clear();
  segment_stack(stack, predictor, {}, 4, nullptr);
  CHECK(calls[0].context_image == -1);
}

TEST_CASE("mid-start runs from the middle towards both ends") {
  const auto stack = marked_stack(6);
  std::vector<Call> calls;
  auto predictor = [&](const Image& s, const Image* ci, const LabelMask* cm) {
    calls.push_back({static_cast<int>(s(0, 0)), ci ? static_cast<int>((*ci)(0, 0)) : -1, cm != nullptr});
    return ring();
  };
  PropagationConfig cfg;
  cfg.mode = PropagationMode::mid_start;
  const auto masks = segment_stack(stack, predictor, cfg, 4);
  std::vector<int> order;
  for (const auto& c : calls) order.push_back(c.slice);
  CHECK(order == std::vector<int>{3, 4, 5, 2, 1, 0});
  CHECK_FALSE(calls[0].context_mask);
  CHECK(calls[0].context_image == 2);
  CHECK(calls[1].context_image == 3);
  CHECK(calls[3].context_image == 3);  // slice 2 sees the slice below it
  CHECK(calls[3].context_mask);
  CHECK(calls[5].context_image == 1);
  CHECK(masks.size() == 6);
}

TEST_CASE("independent mode is equivariant under slice permutation") {
  Rng rng(12);
  CardiacStack stack;
  for (int i = 0; i < 6; ++i) {
    Image im(10, 10);
    for (auto& v : im.px) v = static_cast<float>(rng.below(4));
    stack.slices.push_back(im);
  }
  std::vector<bool> saw_mask;
  auto predictor = [&](const Image& s, const Image*, const LabelMask* cm) {
    saw_mask.push_back(cm != nullptr);
    LabelMask m(s.rows, s.cols);
    for (std::size_t p = 0; p < m.size(); ++p) m.px[p] = static_cast<std::uint8_t>(s.px[p]);
    return m;
  };
  PropagationConfig cfg;
  cfg.mode = PropagationMode::independent;
  const auto base = segment_stack(stack, predictor, cfg, 4);
  CHECK(std::none_of(saw_mask.begin(), saw_mask.end(), [](bool b) { return b; }));
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  CardiacStack shuffled;
  for (int p : perm) shuffled.slices.push_back(stack.slices[p]);
  const auto out = segment_stack(shuffled, predictor, cfg, 4);
  for (int k = 0; k < 6; ++k) CHECK(out[k] == base[perm[k]]);
}

TEST_CASE("empty stacks produce no masks") {
  CardiacStack empty;
  int calls = 0;
  auto predictor = [&](const Image& s, const Image*, const LabelMask*) {
    ++calls;
    return LabelMask(s.rows, s.cols, BG);
  };
  CHECK(segment_stack(empty, predictor, {}, 4).empty());
  CHECK(calls == 0);
}

TEST_CASE("slice inputs: image channel then one-hot mask; null context is zero") {
  const auto spec = build(BuildOptions{.kind = NetKind::lvrv, .width_multiplier = 0.25, .input_size = 16, .depth = 2});
  Image im(16, 16, 1.0f);
  im(3, 3) = 5.0f;
  LabelMask m(16, 16, BG);
  m(4, 4) = RVC;
  const auto in = make_slice_inputs(spec, im, &im, &m);
  CHECK(in.context.shape() == std::vector<int>{1, 5, 16, 16});
  CHECK(in.context.at(0, 0, 3, 3) == doctest::Approx(in.image.at(0, 0, 3, 3)));
  CHECK(in.context.at(0, 1 + RVC, 4, 4) == 1.0);
  CHECK(in.context.at(0, 1 + BG, 4, 4) == 0.0);
  CHECK(in.context.at(0, 1 + BG, 0, 0) == 1.0);
  const auto null = make_slice_inputs(spec, im, nullptr, nullptr);
  CHECK(std::all_of(null.context.values().begin(), null.context.values().end(), [](double v) { return v == 0.0; }));

  const auto lv = build(BuildOptions{.kind = NetKind::lv, .width_multiplier = 0.25, .input_size = 16, .depth = 2});
  CHECK_THROWS_AS(make_slice_inputs(lv, im, &im, &m), Error);  // RVC has no channel in a 3-class context
}

TEST_CASE("network segmentation validates the mode against the network") {
  Network noprop(build(BuildOptions{.kind = NetKind::lvrv_noprop, .width_multiplier = 0.25, .input_size = 16, .depth = 2}), 1);
  CardiacStack s;
  s.slices = {Image(20, 24, 1.0f), Image(20, 24, 2.0f)};
  CHECK_THROWS_AS(segment_stack(s, noprop), Error);
  PropagationConfig cfg;
  cfg.mode = PropagationMode::independent;
  const auto masks = segment_stack(s, noprop, cfg);
  REQUIRE(masks.size() == 2);
  CHECK(masks[0].rows == 20);
  CHECK(masks[0].cols == 24);

  Network prop(build(BuildOptions{.kind = NetKind::lvrv, .width_multiplier = 0.25, .input_size = 16, .depth = 2}), 1);
  CHECK(segment_stack(s, prop).size() == 2);
}
