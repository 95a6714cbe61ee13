#pragma once

// Shared test fixtures built on the library's public types.

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "radnas/detector/config.hpp"
#include "radnas/io/dataset.hpp"
#include "radnas/io/synth.hpp"
#include "radnas/nn/fusion.hpp"
#include "radnas/nn/usconv.hpp"
#include "radnas/ops.hpp"

namespace fixture {

using radnas::Shape;
using radnas::Tensor;
using radnas::Var;

inline constexpr double kNormEps = 1e-3;

// Narrow model that keeps the full module layout.
inline radnas::detector::ModelConfig desk_model_config() {
  radnas::detector::ModelConfig c;
  c.backbone_widths = {8, 16, 32, 64, 128};
  c.stem_widths = {16, 16, 16};
  c.neck_widths = {32, 32, 32};
  return c;
}

// Randomizes bias, affine and running statistics so slicing errors show.
inline void randomize_layer(radnas::nn::USConvLayer& l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5), pos(0.5, 2.0);
  for (auto& v : l.bias.value.values()) v = u(rng);
  if (!l.norm_act) return;
  for (auto& v : l.norm_scale.value.values()) v = pos(rng);
  for (auto& v : l.norm_shift.value.values()) v = u(rng);
  for (auto& v : l.running_mean.values()) v = u(rng);
  for (auto& v : l.running_var.values()) v = pos(rng);
}

// Copies the [0:out, 0:in] slice of weight i into a standalone tensor.
inline Tensor slice_weight(const radnas::nn::USConvLayer& l, std::size_t i, int in, int out) {
  Tensor w(Shape{out, in, l.kernel, l.kernel});
  for (int o = 0; o < out; ++o)
    for (int c = 0; c < in; ++c)
      for (int a = 0; a < l.kernel; ++a)
        for (int b = 0; b < l.kernel; ++b) w.at(o, c, a, b) = l.weights[i].value.at(o, c, a, b);
  return w;
}

inline std::vector<double> slice_vec(const Tensor& t, int n) {
  return std::vector<double>(t.values().begin(), t.values().begin() + n);
}

// Inference-mode output of a layer slice computed from copied parameters.
inline Tensor usconv_oracle(const radnas::nn::USConvLayer& l, const std::vector<Tensor>& xs,
                            int out) {
  const int pad = l.kernel / 2;
  Tensor acc;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor w = slice_weight(l, i, xs[i].shape().c, out);
    Tensor y = oracle::conv2d(xs[i], w, i == 0 ? slice_vec(l.bias.value, out)
                                               : std::vector<double>{},
                              l.stride, pad);
    if (i == 0) {
      acc = y;
    } else {
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += y[j];
    }
  }
  if (!l.norm_act) return acc;
  return oracle::norm_silu(acc, slice_vec(l.norm_scale.value, out),
                           slice_vec(l.norm_shift.value, out), slice_vec(l.running_mean, out),
                           slice_vec(l.running_var, out), kNormEps);
}

// In-memory synthetic samples without touching disk.
inline std::vector<radnas::io::Sample> synth_samples(const radnas::io::SynthConfig& cfg,
                                                     std::uint64_t seed, const std::string& split,
                                                     int count) {
  std::vector<radnas::io::Sample> out;
  for (int i = 0; i < count; ++i) {
    auto scene = radnas::io::synth_scene(cfg, seed, split, i);
    out.push_back({split + "_" + std::to_string(i), radnas::io::make_representations(scene.rd),
                   scene.labels});
  }
  return out;
}

// Scalar probe loss sum(out * R) with R fixed per check.
inline Var probe_loss(const Var& out, const Tensor& r) {
  return radnas::ops::sum(radnas::ops::mul(out, radnas::constant(r)));
}

struct GradCheckResult {
  double max_rel_error = 0;
  int checked = 0;
};

// Compares analytic and central-difference gradients of gamma, lambda, alpha
// and a sample of aux_proj weights on one random exchanger micro-network.
inline GradCheckResult exchanger_grad_check(std::uint64_t seed, double step) {
  using namespace radnas;
  using nn::FusionOption;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ch(2, 6), sp(2, 5);
  const int mode = 1 + static_cast<int>(seed % 2);
  const int primary_c = ch(rng), aux_c = ch(rng);
  const int ph = sp(rng), pw = sp(rng), ah = sp(rng), aw = sp(rng);
  auto ex = nn::ExchangerParams::create(
      "ex", mode, primary_c, aux_c,
      {FusionOption::kGated, FusionOption::kSum, FusionOption::kWeighted}, rng);
  randomize_layer(ex.fusion.aux_proj, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ex.alpha.value[0] = u(rng);
  ex.fusion.gamma->value[0] = u(rng);
  ex.fusion.lambda->value[0] = u(rng);

  const Shape p_shape{2, primary_c, ph, pw}, a_shape{2, aux_c, ah, aw};
  const Tensor primary = oracle::random_tensor(p_shape, rng);
  const Tensor aux = oracle::random_tensor(a_shape, rng);
  const Tensor r = oracle::random_tensor(p_shape, rng);
  const auto ctx = nn::ForwardContext::eval();

  GradCheckResult res;
  for (FusionOption opt : {FusionOption::kGated, FusionOption::kSum, FusionOption::kWeighted}) {
    auto forward = [&]() {
      const Var heat = constant(mode == 1 ? primary : aux);
      const Var gray = constant(mode == 1 ? aux : primary);
      auto [h, g] = nn::exchanger_forward(heat, gray, ex, opt, ctx);
      return probe_loss(mode == 1 ? h : g, r);
    };
    std::vector<Parameter*> params;
    ex.visit({[&](Parameter& p) { params.push_back(&p); }, nullptr});
    for (Parameter* p : params) p->zero_grad();
    backward(forward());

    std::vector<std::pair<Parameter*, std::size_t>> probes{{&ex.alpha, 0}};
    if (opt == FusionOption::kGated) probes.push_back({&*ex.fusion.gamma, 0});
    if (opt == FusionOption::kWeighted) probes.push_back({&*ex.fusion.lambda, 0});
    Parameter& w = ex.fusion.aux_proj.weights[0];
    std::uniform_int_distribution<std::size_t> pick(0, w.value.size() - 1);
    for (int k = 0; k < 4; ++k) probes.push_back({&w, pick(rng)});
    probes.push_back({&ex.fusion.aux_proj.bias, 0});

    for (auto [p, i] : probes) {
      const double analytic = p->grad.empty() ? 0.0 : p->grad[i];
      NoGradGuard guard;
      const double numeric = oracle::central_difference(
          p->value, i, [&] { return forward()->value[0]; }, step);
      double err = oracle::relative_error(analytic, numeric);
      // Gradients at roundoff scale carry no relative information.
      if (std::abs(analytic - numeric) < 1e-9) err = 0.0;
      res.max_rel_error = std::max(res.max_rel_error, err);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace fixture
