#include <doctest.h>

#include <cmath>

#include "common/metric_suite.hpp"
#include "pancraft/error.hpp"
#include "pancraft/kernels.hpp"
#include "pancraft/metric_constants.hpp"

using namespace pancraft;

using metric_suite::smooth_scene;

TEST_CASE("reduced metrics agree with the naive oracles") {
  for (const auto& [name, dev] : metric_suite::oracle_deviation(20, 7)) {
    CAPTURE(name);
    CHECK(dev < 1e-6);
  }
}

TEST_CASE("identity pairs hit the fixed points") {
  for (int64_t bands : {3, 4, 8}) {
    const auto g = smooth_scene(bands, 40, 1);
    const MetricReport r = reduced_metrics(g, g, 4);
    CHECK(r.at("ERGAS") == 0.0);
    CHECK(r.at("SAM") == 0.0);
    CHECK(r.at("SSIM") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.at("Q2n") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.at("SCC") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.at("PSNR") == metric_constants::kPsnrCap);
    CHECK(r.notes.empty() == (bands != 3));
  }
}

TEST_CASE("zero-distortion construction gives HQNR 1") {
  const auto pan = smooth_scene(1, 64, 2);
  const auto fused = replicate_channels(pan, 4);
  const auto ms_lr = mtf_degrade(fused, 4, 1.7);
  const MetricReport r = full_res_metrics(fused, ms_lr, pan, 4, 1.7);
  CHECK(r.at("D_lambda") == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(std::abs(r.at("D_s")) < 1e-12);
  CHECK(r.at("HQNR") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics degrade with distortion") {
  const auto g = smooth_scene(4, 48, 3);
  Tensor<double> f = g;
  Rng rng(4);
  for (int64_t i = 0; i < f.numel(); ++i) f[i] += 0.05 * rng.uniform(-1, 1);
  const MetricReport r = reduced_metrics(f, g, 4);
  CHECK(r.at("ERGAS") > 0.0);
  CHECK(r.at("PSNR") < 40.0);
  CHECK(r.at("Q2n") < 1.0);
  CHECK(r.at("SSIM") < 1.0);
}

TEST_CASE("undefined metrics are reported, not thrown") {
  Tensor<double> zero(Shape{4, 16, 16});
  const MetricReport r = reduced_metrics(zero, zero, 4);
  CHECK_FALSE(r.defined("ERGAS"));
  CHECK_FALSE(r.defined("SAM"));
  CHECK(r.to_json().find("null") != std::string::npos);
}

TEST_CASE("summary statistics") {
  MetricReport a, b;
  a.values["PSNR"] = 30.0;
  b.values["PSNR"] = 32.0;
  b.values["SAM"] = std::nan("");
  const MetricSummary s = MetricSummary::of({a, b});
  CHECK(s.stats.at("PSNR").mean == 31.0);
  CHECK(s.stats.at("PSNR").std == doctest::Approx(std::sqrt(2.0)));
  CHECK(s.stats.at("SAM").count == 0);
}

TEST_CASE("metric shape errors") {
  CHECK_THROWS_AS(ergas(Tensor<double>(Shape{4, 8, 8}), Tensor<double>(Shape{4, 8, 9}), 4), ShapeError);
  CHECK_THROWS_AS(ssim(Tensor<double>(Shape{1, 8, 8}), Tensor<double>(Shape{1, 8, 8})), ShapeError);
}
