#include <benchmark/benchmark.h>

#include "pancraft/attention.hpp"
#include "pancraft/model.hpp"
#include "pancraft/ops.hpp"
#include "pancraft/rng.hpp"

using namespace pancraft;

namespace {

Tensor<float> random_tensor(Shape s, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(std::move(s));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_LocalAttnForward(benchmark::State& state) {
  const int64_t side = state.range(0);
  const int window = static_cast<int>(state.range(1));
  const auto q = random_tensor(Shape{1, 32, side, side}, 1), k = random_tensor(q.shape(), 2),
             v = random_tensor(q.shape(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(local_attn_forward(q, k, v, window, 4));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_LocalAttnForward)->ArgsProduct({{32, 64, 128}, {3, 5}})->Unit(benchmark::kMillisecond);

void BM_LocalAttnBackward(benchmark::State& state) {
  const int64_t side = state.range(0);
  ParamStore<float> store;
  auto& q = store.add("q", random_tensor(Shape{1, 32, side, side}, 1));
  auto& k = store.add("k", random_tensor(q.value.shape(), 2));
  auto& v = store.add("v", random_tensor(q.value.shape(), 3));
  for (auto _ : state) {
    Tape<float> tape;
    tape.backward(sum(local_attn(tape.param(q), tape.param(k), tape.param(v), 3, 4)));
  }
}
BENCHMARK(BM_LocalAttnBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Conv3x3(benchmark::State& state) {
  const int64_t c = state.range(0);
  ParamStore<float> store;
  auto& x = store.add("x", random_tensor(Shape{4, c, 64, 64}, 1));
  auto& w = store.add("w", random_tensor(Shape{c, c, 3, 3}, 2));
  auto& b = store.add("b", random_tensor(Shape{c}, 3));
  for (auto _ : state) {
    Tape<float> tape;
    tape.backward(sum(conv2d(tape.param(x), tape.param(w), tape.param(b), 1, 1)));
  }
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_DeskTrainForward(benchmark::State& state) {
  const PanCrafter<float> model(ModelConfig::desk(4));
  Rng rng(4);
  const auto in = ModelInputs<float>::build(random_tensor(Shape{4, 1, 64, 64}, 5), random_tensor(Shape{4, 4, 16, 16}, 6));
  for (auto _ : state) {
    Tape<float> tape(false);
    benchmark::DoNotOptimize(model.forward(tape, in, MarsMode::Ms).value());
  }
}
BENCHMARK(BM_DeskTrainForward)->Unit(benchmark::kMillisecond);

}  // namespace
