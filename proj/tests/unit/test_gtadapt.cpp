#include "doctest.h"
#include "oracles.hpp"

#include "cardioprop/error.hpp"
#include "cardioprop/gtadapt.hpp"

using namespace cardioprop;

namespace {

// LVC square ringed by LVM, RVC block to the left of the ring.
LabelMask closed_slice(int rv_area = 12) {
  LabelMask m(12, 16, BG);
  for (int r = 3; r < 8; ++r)
    for (int c = 8; c < 13; ++c) m(r, c) = (r == 3 || r == 7 || c == 8 || c == 12) ? LVM : LVC;
  int placed = 0;
  for (int r = 3; r < 8 && placed < rv_area; ++r)
    for (int c = 1; c < 7 && placed < rv_area; ++c, ++placed) m(r, c) = RVC;
  return m;
}

CardiacStack stack_of(std::vector<LabelMask> masks) {
  CardiacStack s;
  for (const auto& m : masks) {
    s.slices.push_back(Image(m.rows, m.cols, 0.0f));
    s.masks.push_back(m);
  }
  return s;
}

}  // namespace

TEST_CASE("basal detection: no trigger gives -1") {
  CHECK(detect_basal_slice(stack_of({closed_slice(), closed_slice(), closed_slice()})) == -1);
}

TEST_CASE("basal detection: open cavity on slice 3 with clean deeper slices") {
  std::vector<LabelMask> masks(6, closed_slice());
  masks[3](5, 8) = BG;  // one LVC pixel now touches background
  masks[1](5, 8) = BG;  // a shallower trigger is never reached
  CHECK(lv_cavity_open(masks[3]));
  CHECK(detect_basal_slice(stack_of(masks)) == 3);
}

TEST_CASE("basal detection: RV shrink thresholds") {
  // |RVC_i| = 7 inside |RVC_{i+1}| = 10: overlap 0.7, area 0.7 -> basal
  auto below = closed_slice(10), slice = closed_slice(7);
  CHECK(rv_cavity_shrinks(slice, below, {}));
  CHECK(detect_basal_slice(stack_of({closed_slice(), slice, below})) == 1);
  // 9 of 10: area ratio 0.9 > 0.8
  CHECK_FALSE(rv_cavity_shrinks(closed_slice(9), below, {}));
  // empty RVC below: the shrink test is skipped
  CHECK_FALSE(rv_cavity_shrinks(closed_slice(3), closed_slice(0), {}));
  // custom thresholds
  CHECK_FALSE(rv_cavity_shrinks(slice, below, {.overlap_threshold = 0.6, .area_threshold = 0.8}));
}

TEST_CASE("basal detection: bottom slice may be basal through an open cavity") {
  std::vector<LabelMask> masks(3, closed_slice());
  masks[2](5, 12) = LVC;  // breaks the ring: LVC next to BG
  CHECK(detect_basal_slice(stack_of(masks)) == 2);
}

TEST_CASE("basal detection: agrees with a literal evaluator on random stacks") {
  Rng rng(11);
  for (int k = 0; k < 300; ++k) {
    const int n = 1 + static_cast<int>(rng.below(8));
    std::vector<LabelMask> masks;
    for (int i = 0; i < n; ++i) {
      auto m = closed_slice(static_cast<int>(rng.below(31)));
      if (rng.bernoulli(0.15)) m(4 + static_cast<int>(rng.below(3)), 8) = BG;
      if (rng.bernoulli(0.1)) m = oracle::random_blobs(rng, 12, 16, 3);
      masks.push_back(m);
    }
    CHECK(detect_basal_slice(stack_of(masks)) == oracle::basal_slice(masks));
  }
}

TEST_CASE("basal detection depends only on masks") {
  auto s = stack_of({closed_slice(), closed_slice(7), closed_slice(10)});
  const int b = detect_basal_slice(s);
  for (auto& im : s.slices) std::fill(im.px.begin(), im.px.end(), 123.0f);
  CHECK(detect_basal_slice(s) == b);
  CardiacStack no_masks;
  no_masks.slices.push_back(Image(2, 2));
  CHECK_THROWS_AS(detect_basal_slice(no_masks), Error);
}

TEST_CASE("ground-truth adaptation rules") {
  const auto s3 = stack_of({closed_slice(), closed_slice(), closed_slice()});
  CHECK(adapt_ground_truth(s3, -1) == s3);

  auto a0 = adapt_ground_truth(s3, 0);
  CHECK(pixel_count(a0.masks[0], RVC) == 0);
  CHECK(pixel_count(a0.masks[0], LVC) == pixel_count(s3.masks[0], LVC));
  CHECK(pixel_count(a0.masks[0], LVM) == pixel_count(s3.masks[0], LVM));
  CHECK(a0.masks[1] == s3.masks[1]);
  CHECK(a0.masks[2] == s3.masks[2]);

  const auto s4 = stack_of({closed_slice(), closed_slice(), closed_slice(), closed_slice()});
  auto a2 = adapt_ground_truth(s4, 2);
  CHECK(a2.masks[0] == LabelMask(12, 16, BG));
  CHECK(a2.masks[1] == LabelMask(12, 16, BG));
  CHECK(pixel_count(a2.masks[2], RVC) == 0);
  CHECK(pixel_count(a2.masks[2], LVM) > 0);
  CHECK(a2.masks[3] == s4.masks[3]);

  CHECK(adapt_ground_truth(a2, 2) == a2);  // idempotent
  CHECK_THROWS_AS(adapt_ground_truth(s4, 4), Error);
}
