#include <doctest.h>

#include <cmath>

#include "oracles/masked_attention.hpp"
#include "pancraft/attention.hpp"
#include "pancraft/error.hpp"
#include "pancraft/rng.hpp"

using namespace pancraft;

namespace {

Tensor<double> random(Shape s, Rng& rng) {
  Tensor<double> t(std::move(s));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-2, 2);
  return t;
}

}  // namespace

TEST_CASE("local attention equals window-masked global attention") {
  Rng rng(3);
  for (int window : {1, 3, 5}) {
    for (int heads : {1, 4}) {
      const Shape s{2, 8, 7, 5};
      const auto q = random(s, rng), k = random(s, rng), v = random(s, rng);
      const auto got = local_attn_forward(q, k, v, window, heads);
      const auto want = oracle::masked_global_attention(q, k, v, window, heads);
      double err = 0;
      for (int64_t i = 0; i < got.numel(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
      CAPTURE(window);
      CAPTURE(heads);
      CHECK(err < 1e-12);
    }
  }
}

TEST_CASE("windows wider than the image") {
  Rng rng(5);
  for (const Shape& s : {Shape{1, 4, 1, 1}, Shape{1, 4, 2, 1}, Shape{1, 4, 1, 3}, Shape{2, 4, 2, 2}}) {
    const auto q = random(s, rng), k = random(s, rng), v = random(s, rng);
    Tensor<double> w;
    const auto got = local_attn_forward(q, k, v, 5, 2, &w);
    const auto want = oracle::masked_global_attention(q, k, v, 5, 2);
    double err = 0;
    for (int64_t i = 0; i < got.numel(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
    CAPTURE(s.str());
    CHECK(err < 1e-12);
  }
}

TEST_CASE("window 1 returns the values") {
  Rng rng(4);
  const Shape s{1, 4, 3, 3};
  const auto q = random(s, rng), k = random(s, rng), v = random(s, rng);
  CHECK(local_attn_forward(q, k, v, 1, 2) == v);
}

TEST_CASE("attention weights sum to one and vanish outside the image") {
  Rng rng(5);
  const Shape s{1, 2, 4, 4};
  const auto q = random(s, rng), k = random(s, rng), v = random(s, rng);
  Tensor<double> w;
  local_attn_forward(q, k, v, 3, 1, &w);
  CHECK(w.shape() == Shape{1, 16, 3, 3});
  for (int64_t p = 0; p < 16; ++p) {
    double total = 0;
    for (int i = 0; i < 9; ++i) total += w[p * 9 + i];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int i = 0; i < 3; ++i) CHECK(w[i] == 0.0);  // top row of the corner query
}

TEST_CASE("attention argument validation") {
  Rng rng(6);
  const auto q = random(Shape{1, 6, 4, 4}, rng);
  CHECK_THROWS_AS(local_attn_forward(q, q, q, 2, 1), ShapeError);
  CHECK_THROWS_AS(local_attn_forward(q, q, q, 3, 4), ShapeError);
  CHECK_THROWS_AS(local_attn_forward(q, random(Shape{1, 6, 4, 5}, rng), q, 3, 1), ShapeError);
}
