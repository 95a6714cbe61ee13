#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "radnas/nn/attention.hpp"
#include "radnas/nn/fusion.hpp"
#include "radnas/nn/stem.hpp"
#include "radnas/nn/usconv.hpp"
#include "radnas/ops.hpp"

using namespace radnas;
using namespace radnas::nn;

namespace {

const auto kEval = ForwardContext::eval();
const std::vector<FusionOption> kAll{FusionOption::kGated, FusionOption::kSum,
                                     FusionOption::kWeighted};

Var rand_var(Shape s, std::mt19937_64& rng) { return constant(oracle::random_tensor(s, rng)); }

}  // namespace

TEST(RealizedChannels, Rule) {
  EXPECT_EQ(realized_channels(0.5, 8), 4);
  EXPECT_EQ(realized_channels(0.25, 2), 1);
  EXPECT_EQ(realized_channels(0.25, 1), 1);
  EXPECT_EQ(realized_channels(0.75, 10), 8);
  EXPECT_EQ(realized_channels(1.0, 7), 7);
  EXPECT_EQ(WidthChoice{0.5}.realize(8), 4);
}

TEST(USConv, HalfWidthOutputChannels) {
  std::mt19937_64 rng(1);
  auto l = USConvLayer::create("l", {6}, 8, 3, 1, true, rng);
  const Var y = usconv_forward(l, rand_var({1, 6, 5, 5}, rng), WidthChoice{1.0}, WidthChoice{0.5},
                               kEval);
  EXPECT_EQ(y->shape(), (Shape{1, 4, 5, 5}));
}

TEST(USConv, FullWidthMatchesStandardConvolution) {
  std::mt19937_64 rng(2);
  for (bool norm : {true, false}) {
    auto l = USConvLayer::create("l", {5}, 7, 3, 2, norm, rng);
    fixture::randomize_layer(l, rng);
    const Tensor x = oracle::random_tensor({2, 5, 7, 6}, rng);
    const Var y = usconv_forward(l, constant(x), 7, kEval);
    EXPECT_LE(max_abs_diff(y->value, fixture::usconv_oracle(l, {x}, 7)), 1e-12);
  }
}

TEST(USConv, SlicedOracleRandomDraws) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cm(1, 12), sp(3, 9), nb(1, 2), kk(0, 1), st(1, 2), fr(0, 3);
  const double fracs[] = {0.25, 0.5, 0.75, 1.0};
  double worst = 0;
  for (int draw = 0; draw < 120; ++draw) {
    const int in_max = cm(rng), out_max = cm(rng);
    const int k = kk(rng) ? 3 : 1;
    auto l = USConvLayer::create("l", {in_max}, out_max, k, st(rng), draw % 3 != 0, rng);
    fixture::randomize_layer(l, rng);
    const WidthChoice fi{fracs[fr(rng)]}, fo{fracs[fr(rng)]};
    const int cin = fi.realize(in_max), cout = fo.realize(out_max);
    const Tensor x = oracle::random_tensor({nb(rng), cin, sp(rng), sp(rng)}, rng);
    const Var y = usconv_forward(l, constant(x), fi, fo, kEval);
    ASSERT_EQ(y->shape().c, cout);
    worst = std::max(worst, max_abs_diff(y->value, fixture::usconv_oracle(l, {x}, cout)));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(USConv, TwoInputLayerSumsContributions) {
  std::mt19937_64 rng(4);
  auto l = USConvLayer::create("l", {4, 6}, 5, 3, 1, true, rng);
  fixture::randomize_layer(l, rng);
  const Tensor a = oracle::random_tensor({1, 3, 4, 4}, rng);
  const Tensor b = oracle::random_tensor({1, 2, 4, 4}, rng);
  const Var inputs[2] = {constant(a), constant(b)};
  const Var y = usconv_forward(l, std::span<const Var>(inputs, 2), 3, kEval);
  EXPECT_LE(max_abs_diff(y->value, fixture::usconv_oracle(l, {a, b}, 3)), 1e-12);
  EXPECT_EQ(l.param_count(std::vector<int>{3, 2}, 3), 3u * 3 * 9 + 3u * 2 * 9 + 3 + 3 + 3);
}

TEST(USConv, RejectsChannelMismatch) {
  std::mt19937_64 rng(5);
  auto l = USConvLayer::create("l", {8}, 8, 1, 1, true, rng);
  EXPECT_THROW(usconv_forward(l, rand_var({1, 3, 4, 4}, rng), WidthChoice{0.5}, WidthChoice{1.0},
                              kEval),
               std::invalid_argument);
  EXPECT_THROW(usconv_forward(l, rand_var({1, 9, 4, 4}, rng), 4, kEval), std::invalid_argument);
}

TEST(USConv, SliceGradientStaysInPrefix) {
  std::mt19937_64 rng(6);
  auto l = USConvLayer::create("l", {8}, 8, 3, 1, true, rng);
  const Var y = usconv_forward(l, rand_var({2, 4, 5, 5}, rng), 3,
                               ForwardContext::train());
  backward(ops::sum(ops::mul(y, y)));
  const Tensor& g = l.weights[0].grad;
  ASSERT_FALSE(g.empty());
  for (int o = 0; o < 8; ++o)
    for (int c = 0; c < 8; ++c)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (o >= 3 || c >= 4) EXPECT_EQ(g.at(o, c, a, b), 0.0);
  EXPECT_EQ(l.weights[0].touched, (Shape{3, 4, 3, 3}));
}

TEST(CoordAttention, ShapeAndGateRange) {
  std::mt19937_64 rng(7);
  auto attn = CoordAttention::create("a", 16, rng);
  EXPECT_EQ(attention_mid_channels(16), 8);
  EXPECT_EQ(attention_mid_channels(256), 32);
  for (int c : {1, 5, 16}) {
    const Var x = rand_var({2, c, 3, 7}, rng);
    EXPECT_EQ(coordinate_attention(attn, x, kEval)->shape(), x->shape());
    const auto g = coordinate_attention_gates(attn, x, kEval);
    for (const Var& gate : {g.gate_h, g.gate_w})
      for (double v : gate->value.values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
  }
}

TEST(CoordAttention, ZeroGateParametersGiveQuarter) {
  std::mt19937_64 rng(8);
  auto attn = CoordAttention::create("a", 6, rng);
  for (USConvLayer* l : {&attn.gate_h, &attn.gate_w}) {
    l->weights[0].value.fill(0.0);
    l->bias.value.fill(0.0);
  }
  const Var x = rand_var({2, 6, 4, 5}, rng);
  const Var y = coordinate_attention(attn, x, kEval);
  for (std::size_t i = 0; i < x->value.size(); ++i) EXPECT_DOUBLE_EQ(y->value[i], 0.25 * x->value[i]);
}

TEST(Fusion, SumWithZeroAuxIsIdentity) {
  std::mt19937_64 rng(9);
  auto f = FusionParams::create("f", 3, 4, kAll, rng);
  f.aux_proj.bias.value.fill(0.0);
  const Var p = rand_var({2, 4, 4, 4}, rng);
  const Var aux = constant(Tensor({2, 3, 2, 2}, 0.0));
  EXPECT_EQ(max_abs_diff(primary_aux_fuse(p, aux, FusionOption::kSum, f, kEval)->value, p->value),
            0.0);
}

TEST(Fusion, WeightedWithZeroLambdaIsIdentity) {
  std::mt19937_64 rng(10);
  auto f = FusionParams::create("f", 3, 4, kAll, rng);
  fixture::randomize_layer(f.aux_proj, rng);
  ASSERT_EQ(f.lambda->value[0], 0.0);
  const Var p = rand_var({2, 4, 4, 4}, rng);
  const Var y = primary_aux_fuse(p, rand_var({2, 3, 8, 8}, rng), FusionOption::kWeighted, f, kEval);
  EXPECT_EQ(max_abs_diff(y->value, p->value), 0.0);
}

TEST(Fusion, GatedWithZeroGammaAddsHalfProjection) {
  std::mt19937_64 rng(11);
  auto f = FusionParams::create("f", 2, 3, kAll, rng);
  fixture::randomize_layer(f.aux_proj, rng);
  ASSERT_EQ(f.gamma->value[0], 0.0);
  const Tensor p = oracle::random_tensor({1, 3, 2, 2}, rng);
  const Tensor a = oracle::random_tensor({1, 2, 2, 2}, rng);
  const Var y = primary_aux_fuse(constant(p), constant(a), FusionOption::kGated, f, kEval);
  const Tensor proj = fixture::usconv_oracle(f.aux_proj, {a}, 3);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(y->value[i], p[i] + 0.5 * proj[i], 1e-12);
}

TEST(Fusion, ResizesAuxBilinearlyAndWeightsInUnitInterval) {
  std::mt19937_64 rng(12);
  auto f = FusionParams::create("f", 2, 3, kAll, rng);
  fixture::randomize_layer(f.aux_proj, rng);
  f.gamma->value[0] = 3.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Var p = rand_var({2, 3, 4, 6}, rng);
    const Var a = rand_var({2, 2, 8, 3}, rng);
    EXPECT_EQ(primary_aux_fuse(p, a, FusionOption::kGated, f, kEval)->shape(), p->shape());
    const Var proj = usconv_forward(f.aux_proj, a, 3, kEval);
    const Var w = fusion_weight(ops::resize_bilinear(proj, 4, 6), f);
    EXPECT_EQ(w->shape(), (Shape{2, 3, 1, 1}));
    for (double v : w->value.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  // Half-pixel-center bilinear: 2 -> 4 samples at 0, 0.25, 0.75, 1 between ends.
  const Var line = constant(Tensor({1, 1, 1, 2}, std::vector<double>{0.0, 4.0}));
  const Var up = ops::resize_bilinear(line, 1, 4);
  EXPECT_EQ(std::vector<double>(up->value.values().begin(), up->value.values().end()),
            (std::vector<double>{0.0, 1.0, 3.0, 4.0}));
}

TEST(Fusion, MissingOptionIsRejected) {
  std::mt19937_64 rng(13);
  auto f = FusionParams::create("f", 2, 3, {FusionOption::kSum}, rng);
  EXPECT_FALSE(f.gamma.has_value());
  EXPECT_FALSE(f.lambda.has_value());
  const Var p = rand_var({1, 3, 2, 2}, rng), a = rand_var({1, 2, 2, 2}, rng);
  EXPECT_ANY_THROW(primary_aux_fuse(p, a, FusionOption::kGated, f, kEval));
  EXPECT_ANY_THROW(primary_aux_fuse(p, a, FusionOption::kWeighted, f, kEval));
}

TEST(Exchanger, ZeroAlphaIsIdentityOnBothStreams) {
  std::mt19937_64 rng(14);
  for (int mode : {1, 2}) {
    const int heat_c = 6, gray_c = 4;
    auto ex = ExchangerParams::create("e", mode, mode == 1 ? heat_c : gray_c,
                                      mode == 1 ? gray_c : heat_c, kAll, rng);
    ASSERT_EQ(ex.alpha.value[0], 0.0);
    fixture::randomize_layer(ex.fusion.aux_proj, rng);
    ex.fusion.gamma->value[0] = 0.8;
    const Var heat = rand_var({2, heat_c, 4, 4}, rng), gray = rand_var({2, gray_c, 8, 8}, rng);
    for (FusionOption o : kAll) {
      auto [h, g] = exchanger_forward(heat, gray, ex, o, kEval);
      EXPECT_EQ(max_abs_diff(h->value, heat->value), 0.0);
      EXPECT_EQ(max_abs_diff(g->value, gray->value), 0.0);
    }
  }
}

TEST(Exchanger, ModeOneKeepsHeatShape) {
  std::mt19937_64 rng(15);
  auto ex = ExchangerParams::create("e", 1, 6, 4, kAll, rng);
  ex.alpha.value[0] = 0.5;
  const Var heat = rand_var({1, 6, 2, 2}, rng);
  for (Shape gs : {Shape{1, 4, 8, 8}, Shape{1, 4, 2, 2}, Shape{1, 4, 3, 5}}) {
    auto [h, g] = exchanger_forward(heat, rand_var(gs, rng), ex, kEval);
    EXPECT_EQ(h->shape(), heat->shape());
    EXPECT_EQ(g->shape(), gs);
  }
}

TEST(Exchanger, ModeTwoIsRoleSwap) {
  std::mt19937_64 rng(16);
  auto ex = ExchangerParams::create("e", 2, 4, 6, kAll, rng);
  fixture::randomize_layer(ex.fusion.aux_proj, rng);
  ex.alpha.value[0] = 0.7;
  ex.fusion.gamma->value[0] = -0.4;
  const Var a = rand_var({2, 6, 4, 4}, rng);  // heat stream
  const Var b = rand_var({2, 4, 8, 8}, rng);  // gray stream
  auto [h, g] = exchanger_forward(a, b, ex, FusionOption::kGated, kEval);
  EXPECT_EQ(h, a);
  const Var fused = primary_aux_fuse(b, a, FusionOption::kGated, ex.fusion, kEval);
  const Var att = coordinate_attention(ex.attention, fused, kEval);
  for (std::size_t i = 0; i < b->value.size(); ++i)
    EXPECT_NEAR(g->value[i], b->value[i] + 0.7 * att->value[i], 1e-14);
}

TEST(Exchanger, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto r = fixture::exchanger_grad_check(100 + seed, 1e-3);
    EXPECT_GT(r.checked, 0);
    EXPECT_LE(r.max_rel_error, 1e-3) << "seed " << seed;
  }
}

TEST(Exchanger, OutputsFiniteForFiniteInputs) {
  std::mt19937_64 rng(17);
  auto ex = ExchangerParams::create("e", 1, 5, 3, kAll, rng);
  ex.alpha.value[0] = 2.0;
  ex.fusion.gamma->value[0] = 50.0;
  ex.fusion.lambda->value[0] = -3.0;
  const Var heat = constant(oracle::random_tensor({2, 5, 4, 4}, rng, -1e3, 1e3));
  const Var gray = constant(oracle::random_tensor({2, 3, 4, 4}, rng, -1e3, 1e3));
  for (FusionOption o : kAll) {
    auto [h, g] = exchanger_forward(heat, gray, ex, o, ForwardContext::train());
    EXPECT_TRUE(h->value.all_finite());
  }
}

TEST(Stem, ShapesAndDivisibility) {
  std::mt19937_64 rng(18);
  auto stem = StemParams::create("stem", 1, {8, 12, 16}, rng);
  const Var y = stem_forward(rand_var({1, 1, 64, 64}, rng), stem, {8, 12, 16}, kEval);
  EXPECT_EQ(y->shape(), (Shape{1, 16, 16, 16}));
  const Var z = stem_forward(rand_var({2, 1, 32, 64}, rng), stem, {4, 6, 8}, kEval);
  EXPECT_EQ(z->shape(), (Shape{2, 8, 8, 16}));
  EXPECT_THROW(stem_forward(rand_var({1, 1, 30, 32}, rng), stem, {8, 12, 16}, kEval),
               std::invalid_argument);
  EXPECT_EQ(stem.convs[0].stride, 2);
  EXPECT_EQ(stem.convs[1].stride, 2);
  EXPECT_EQ(stem.convs[2].stride, 1);
}
