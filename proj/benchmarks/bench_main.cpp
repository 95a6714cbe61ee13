#include <benchmark/benchmark.h>

#include <random>

#include "radnas/detector/model.hpp"
#include "radnas/detector/trainer.hpp"
#include "radnas/io/synth.hpp"
#include "radnas/nn/usconv.hpp"
#include "radnas/ops.hpp"

using namespace radnas;
using namespace radnas::detector;

namespace {

ModelConfig desk_config() {
  ModelConfig c;
  c.backbone_widths = {8, 16, 32, 64, 128};
  c.stem_widths = {16, 16, 16};
  c.neck_widths = {32, 32, 32};
  return c;
}

Tensor random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

std::vector<io::Sample> samples(int n) {
  io::SynthConfig cfg;
  std::vector<io::Sample> out;
  for (int i = 0; i < n; ++i) {
    auto scene = io::synth_scene(cfg, 1, "train", i);
    out.push_back({"s" + std::to_string(i), io::make_representations(scene.rd), scene.labels});
  }
  return out;
}

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Var x = constant(random_tensor({16, c, 16, 16}, 1));
  const Var w = constant(random_tensor({c, c, 3, 3}, 2));
  const Var b = constant(random_tensor({c, 1, 1, 1}, 3));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 2ll * c * c * 9 * 16 * 16 * 16);
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32)->Arg(64);

void BM_USConvHalfWidth(benchmark::State& state) {
  std::mt19937_64 rng(4);
  auto layer = nn::USConvLayer::create("l", {64}, 64, 3, 1, true, rng);
  const Var x = constant(random_tensor({16, 32, 16, 16}, 5));
  const auto ctx = nn::ForwardContext::eval();
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::usconv_forward(layer, x, 32, ctx));
}
BENCHMARK(BM_USConvHalfWidth);

void BM_SupernetTrainStep(benchmark::State& state) {
  const auto cfg = desk_config();
  Model m = build_supernet(cfg, 1);
  const auto data = samples(16);
  std::vector<const io::Sample*> ptrs;
  for (const auto& s : data) ptrs.push_back(&s);
  const Batch batch = make_batch(ptrs);
  Sgd opt(0.9, 5e-4);
  const auto params = m.parameters();
  int step = 0;
  for (auto _ : state) {
    train_step(m, batch, m.full_arch(), opt, params, 1e-3, 10.0, step++);
  }
}
BENCHMARK(BM_SupernetTrainStep)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const auto cfg = desk_config();
  Model m = build_supernet(cfg, 1);
  const auto data = samples(32);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, m.full_arch(), data));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
