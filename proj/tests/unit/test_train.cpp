#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "pancraft/error.hpp"
#include "pancraft/parallel.hpp"
#include "pancraft/train.hpp"

using namespace pancraft;
namespace fs = std::filesystem;

namespace {

std::vector<Triplet> tiny_data(int scenes = 2) {
  std::vector<Triplet> out;
  SceneOptions o;
  o.size = 32;
  WaldOptions w;
  w.patch = 16;
  for (int i = 0; i < scenes; ++i)
    for (auto& t : wald_degrade(generate_scene(100 + i, o), w)) out.push_back(std::move(t));
  return out;
}

TrainConfig tiny_config(int iters) {
  TrainConfig c = TrainConfig::desk();
  c.iters = iters;
  c.warmup = 1;
  c.batch = 2;
  c.lr = 1e-3;
  return c;
}

std::vector<Tensor<float>> snapshot(const PanCrafter<float>& m) {
  std::vector<Tensor<float>> out;
  for (const auto& p : m.params()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.lr = 2e-4;
  c.warmup = 100;
  c.iters = 1000;
  CHECK(lr_at(c, 50) == doctest::Approx(0.5 * lr_at(c, 100)));
  CHECK(lr_at(c, 100) == doctest::Approx(2e-4));
  CHECK(lr_at(c, 1000) == doctest::Approx(0.0).scale(1.0));
  CHECK(lr_at(c, 550) == doctest::Approx(1e-4));
  CHECK(lr_at(c, 300) > lr_at(c, 301));
}

TEST_CASE("MARs loss") {
  Tensor<double> gt(Shape{1, 4, 4, 4}, 0.25), gp(Shape{1, 4, 4, 4}, 0.5);
  Tensor<double> off = gt, offp = gp;
  for (int64_t i = 0; i < off.numel(); ++i) off[i] += 0.5, offp[i] += 0.5;
  CHECK(mars_loss_value(gt, gt, gp, gp, 1.0) == 0.0);
  CHECK(mars_loss_value(off, gt, offp, gp, 1.0) == doctest::Approx(1.0));
  CHECK(mars_loss_value(off, gt, offp, gp, 0.0) == doctest::Approx(0.5));
  Tape<double> tape(false);
  const auto v = mars_loss(tape.constant(off), gt, tape.constant(offp), gp, 1.0);
  CHECK(v.value()[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(mars_loss_value(off, Tensor<double>(Shape{1, 4, 4, 5}), offp, gp, 1.0), ShapeError);
}

TEST_CASE("AdamW reaches the minimum of a quadratic") {
  ParamStore<double> store;
  auto& p = store.add("p", Tensor<double>(Shape{2}, 0.0));
  AdamW<double> opt(store, {0.9, 0.999, 1e-8, 0.0});
  const double a[2] = {3.0, -1.5}, k[2] = {1.0, 4.0};
  int steps = 0;
  for (; steps < 5000; ++steps) {
    for (int i = 0; i < 2; ++i) p.grad[i] = 2 * k[i] * (p.value[i] - a[i]);
    const double lr = 0.05 * 0.5 * (1 + std::cos(M_PI * steps / 5000.0));
    opt.step(lr);
    if (std::abs(p.value[0] - a[0]) < 1e-6 && std::abs(p.value[1] - a[1]) < 1e-6) break;
  }
  CHECK(steps < 5000);
}

TEST_CASE("decoupled decay contracts parameters exactly") {
  ParamStore<double> store;
  auto& p = store.add("p", Tensor<double>(Shape{3}, 2.0));
  AdamW<double> opt(store, {0.9, 0.999, 1e-8, 0.1});
  double expect = 2.0;
  for (int s = 0; s < 10; ++s) {
    p.zero_grad();
    opt.step(0.01);
    expect *= 1.0 - 0.01 * 0.1;
  }
  CHECK(p.value[0] == expect);
}

TEST_CASE("zero learning rate is a fixed point") {
  PanCrafter<float> model(ModelConfig::toy(4));
  TrainConfig c = tiny_config(2);
  c.lr = 0.0;
  c.augment = false;
  c.batch = 8;
  Trainer tr(model, c, tiny_data(2));
  const auto before = snapshot(model);
  const StepRecord a = tr.step(), b = tr.step();
  CHECK(snapshot(model) == before);
  CHECK(a.loss_ms == b.loss_ms);
  CHECK(a.loss_pan == b.loss_pan);
}

TEST_CASE("mode routing of gradients") {
  for (bool mars : {true, false}) {
    PanCrafter<float> model(ModelConfig::toy(4));
    TrainConfig c = tiny_config(3);
    c.mars = mars;
    Trainer tr(model, c, tiny_data(1));
    tr.run();
    CAPTURE(mars);
    CHECK(mode_grad_abs_sum(model.params(), MarsMode::Ms) > 0.0);
    if (mars) {
      CHECK(mode_grad_abs_sum(model.params(), MarsMode::Pan) > 0.0);
    } else {
      CHECK(mode_grad_abs_sum(model.params(), MarsMode::Pan) == 0.0);
    }
  }
  CHECK(is_mode_param("enc0.0.mod.gamma_pan", MarsMode::Pan));
  CHECK(is_mode_param("mid.1.select.alpha_ms_2", MarsMode::Ms));
  CHECK_FALSE(is_mode_param("enc0.0.conv1.weight", MarsMode::Pan));
}

TEST_CASE("two-stage schedule") {
  TrainConfig c;
  c.iters = 10;
  c.two_stage = true;
  c.pretrain_fraction = 0.3;
  CHECK(modes_at(c, 3).pan);
  CHECK_FALSE(modes_at(c, 3).ms);
  CHECK(modes_at(c, 4).ms);
  CHECK_FALSE(modes_at(c, 4).pan);
}

TEST_CASE("identical seeds give identical step records") {
  set_deterministic(true);
  std::vector<double> runs[2];
  for (auto& losses : runs) {
    PanCrafter<float> model(ModelConfig::toy(4));
    Trainer tr(model, tiny_config(4), tiny_data(2));
    tr.run([&](const StepRecord& r) {
      losses.push_back(r.loss_ms);
      losses.push_back(r.loss_pan);
    });
  }
  set_deterministic(false);
  CHECK(runs[0] == runs[1]);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  PanCrafter<float> straight(ModelConfig::toy(4));
  Trainer a(straight, tiny_config(4), tiny_data(2));
  a.run();

  PanCrafter<float> first(ModelConfig::toy(4));
  Trainer b(first, tiny_config(4), tiny_data(2));
  b.step();
  b.step();
  const Archive ckpt = Archive::deserialize(b.checkpoint().serialize());

  PanCrafter<float> second = PanCrafter<float>::from_archive(ckpt);
  Trainer c(second, tiny_config(4), tiny_data(2));
  c.resume(ckpt);
  CHECK(c.iteration() == 2);
  c.run();
  CHECK(snapshot(second) == snapshot(straight));
}

TEST_CASE("non-finite loss aborts with a batch dump") {
  auto data = tiny_data(1);
  for (auto& t : data) t.ms_hr[0] = std::numeric_limits<float>::quiet_NaN();
  PanCrafter<float> model(ModelConfig::toy(4));
  Trainer tr(model, tiny_config(2), data);
  const fs::path dir = fs::temp_directory_path() / "pancraft_tests" / "nan";
  fs::remove_all(dir);
  fs::create_directories(dir);
  tr.dump_dir = dir;
  CHECK_THROWS_AS(tr.step(), NumericError);
  CHECK(fs::exists(dir / "nan_batch_1.pct1bundle"));
}

TEST_CASE("train config json and validation") {
  TrainConfig c = TrainConfig::desk();
  c.lr = 3e-4;
  c.two_stage = true;
  CHECK(TrainConfig::from_json(c.to_json()) == c);
  CHECK(TrainConfig::from_json("{\"iters\": 10, \"warmup\": 5}").iters == 10);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"lrate\": 1}"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json("{\"iters\": 10, \"warmup\": 50}"), ConfigError);
  CHECK(TrainConfig::paper().batch == 48);
  CHECK(TrainConfig::paper().iters == 50000);
}

TEST_CASE("ablation grid of one cell") {
  AblationSpec spec;
  spec.model = ModelConfig::toy(4);
  spec.train = tiny_config(2);
  spec.cells = {{true, false}};
  spec.train_data = tiny_data(1);
  spec.eval_data = tiny_data(1);
  const AblationReport r = run_ablation(spec);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].pan_grad_abs > 0.0);
  const std::string csv = r.csv();
  CHECK(csv.rfind("mars,cm3a,seed,HQNR", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}
