#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "cardioprop/error.hpp"
#include "cardioprop/losses.hpp"

using namespace cardioprop;

namespace {

Tensor random_probs(Rng& rng, std::vector<int> shape) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

Tensor random_onehot(Rng& rng, int n, int c, int h, int w) {
  Tensor t({n, c, h, w}, 0.0);
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(b, static_cast<int>(rng.below(c)), y, x) = 1.0;
  return t;
}

// Per-class Dice term written out from the definition.
double soft_dice(const Tensor& p, const Tensor& g, int n, int c, double eps) {
  double i = 0, a = 0, b = 0;
  for (int y = 0; y < p.dim(2); ++y)
    for (int x = 0; x < p.dim(3); ++x) {
      i += p.at(n, c, y, x) * g.at(n, c, y, x);
      a += p.at(n, c, y, x);
      b += g.at(n, c, y, x);
    }
  return (2 * i + eps) / (a + b + eps);
}

}  // namespace

TEST_CASE("binary dice loss worked values") {
  const std::vector<double> p{1, 0, 1, 0}, g{1, 0, 0, 0};
  // -(2*1 + 1) / (2 + 1 + 1)
  CHECK(dice_loss_binary(p, g).value == doctest::Approx(-0.75));
  CHECK(dice_loss_binary(g, g).value == -1.0);
  const std::vector<double> z(4, 0.0);
  CHECK(dice_loss_binary(z, z).value == -1.0);  // both empty: perfect
  CHECK(dice_loss_binary(p, g, {.epsilon = 1e-3}).value == doctest::Approx(-(2.001) / 3.001));
  CHECK_THROWS_AS(dice_loss_binary(p, std::vector<double>(3, 0.0)), Error);
  CHECK_THROWS_AS(dice_loss_binary(p, g, {.epsilon = 0.0}), Error);
}

TEST_CASE("all three losses stay in [-1, 0) and hit -1 on perfect predictions") {
  Rng rng(31);
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng.below(3)), h = 1 + static_cast<int>(rng.below(9)),
              w = 1 + static_cast<int>(rng.below(9));
    const auto p1 = random_probs(rng, {n, 1, h, w});
    Tensor g1({n, 1, h, w});
    for (auto& v : g1.values()) v = static_cast<double>(rng.below(2));
    const double dl1 = dice_loss_binary(p1, g1).value;
    CHECK(dl1 >= -1.0);
    CHECK(dl1 < 0.0);

    for (int classes : {4, 3}) {
      const auto g = random_onehot(rng, n, classes, h, w);
      const auto p = random_probs(rng, {n, classes, h, w});
      const double v = dice_loss_multiclass(p, g, classes).value;
      CHECK(v >= -1.0);
      CHECK(v < 0.0);
      CHECK(dice_loss_multiclass(g, g, classes).value == -1.0);
    }
    CHECK(dice_loss_binary(g1, g1).value == -1.0);
  }
}

TEST_CASE("multiclass loss is the negated mean of per-class Dice terms") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_onehot(rng, 2, 4, 5, 6);
    const auto p = random_probs(rng, {2, 4, 5, 6});
    double expect = 0;
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 4; ++c) expect -= soft_dice(p, g, n, c, 1.0) / 8;
    CHECK(dice_loss_multiclass(p, g, 4).value == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("four-class loss restricted to three classes equals the three-class loss") {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const auto g4 = random_onehot(rng, 2, 4, 4, 4);
    const auto p4 = random_probs(rng, {2, 4, 4, 4});
    Tensor g3({2, 3, 4, 4}), p3({2, 3, 4, 4});
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) {
            g3.at(n, c, y, x) = g4.at(n, c, y, x);
            p3.at(n, c, y, x) = p4.at(n, c, y, x);
          }
    const auto a = dice_loss_multiclass(p4, g4, 3), b = dice_loss_multiclass(p3, g3, 3);
    CHECK(a.value == b.value);
    // gradient of the ignored channel is zero
    for (int y = 0; y < 4; ++y) CHECK(a.grad[(0 * 4 + 3) * 16 + y] == 0.0);
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const int classes = t % 3 == 0 ? 1 : (t % 3 == 1 ? 3 : 4);
    const int n = 1 + static_cast<int>(rng.below(2)), h = 2 + static_cast<int>(rng.below(4)), w = 2 + static_cast<int>(rng.below(4));
    Tensor p = random_probs(rng, {n, classes, h, w});
    Tensor g = classes == 1 ? random_probs(rng, {n, 1, h, w}) : random_onehot(rng, n, classes, h, w);
    if (classes == 1)
      for (auto& v : g.values()) v = v > 0.5;
    auto value = [&] { return classes == 1 ? dice_loss_binary(p, g).value : dice_loss_multiclass(p, g, classes).value; };
    const auto grad = classes == 1 ? dice_loss_binary(p, g).grad : dice_loss_multiclass(p, g, classes).grad;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double numeric = oracle::central_difference(value, p.values()[i]);
      CHECK(oracle::relative_error(grad[i], numeric) < 1e-4);
    }
  }
}

TEST_CASE("multiclass loss validates shapes") {
  Tensor p({1, 4, 2, 2}, 0.25), g({1, 4, 2, 2}, 0.0);
  CHECK_THROWS_AS(dice_loss_multiclass(p, g, 5), Error);
  CHECK_THROWS_AS(dice_loss_multiclass(p, Tensor({1, 3, 2, 2}), 3), Error);
  CHECK_THROWS_AS(dice_loss_binary(p, g), Error);
}
