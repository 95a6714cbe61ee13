#include "radnas/nn/usconv.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace radnas::nn {

int realized_channels(double fraction, int channels_max) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("width fraction " + std::to_string(fraction) +
                                " outside (0,1]");
  }
  return std::max(1, static_cast<int>(std::lround(fraction * channels_max)));
}

int WidthChoice::realize(int channels_max) const {
  return realized_channels(fraction, channels_max);
}

USConvLayer USConvLayer::create(std::string name, std::vector<int> in_max,
                                int out_max, int kernel, int stride,
                                bool norm_act, std::mt19937_64& rng) {
  if (out_max < 1 || in_max.empty() || kernel < 1 || stride < 1) {
    throw std::invalid_argument("USConvLayer " + name + ": bad geometry");
  }
  USConvLayer layer;
  layer.name = name;
  layer.out_max = out_max;
  layer.in_max = in_max;
  layer.kernel = kernel;
  layer.stride = stride;
  layer.norm_act = norm_act;

  int fan_in = 0;
  for (int c : in_max) {
    if (c < 1) throw std::invalid_argument("USConvLayer " + name + ": C_in < 1");
    fan_in += c * kernel * kernel;
  }
  const double bound = std::sqrt(3.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < in_max.size(); ++i) {
    Parameter w(name + ".weight" + (in_max.size() > 1 ? std::to_string(i) : ""),
                Shape{out_max, in_max[i], kernel, kernel});
    for (double& v : w.value.values()) v = dist(rng);
    layer.weights.push_back(std::move(w));
  }
  layer.bias = Parameter(name + ".bias", Shape{out_max, 1, 1, 1}, false);
  if (norm_act) {
    layer.norm_scale = Parameter(name + ".norm_scale", Shape{out_max, 1, 1, 1}, false);
    layer.norm_scale.value.fill(1.0);
    layer.norm_shift = Parameter(name + ".norm_shift", Shape{out_max, 1, 1, 1}, false);
    layer.running_mean = Tensor(Shape{out_max, 1, 1, 1}, 0.0);
    layer.running_var = Tensor(Shape{out_max, 1, 1, 1}, 1.0);
  }
  return layer;
}

void USConvLayer::visit(const TensorVisitor& v) {
  if (v.on_param) {
    for (auto& w : weights) v.on_param(w);
    v.on_param(bias);
    if (norm_act) {
      v.on_param(norm_scale);
      v.on_param(norm_shift);
    }
  }
  if (v.on_buffer && norm_act) {
    v.on_buffer(name + ".running_mean", running_mean);
    v.on_buffer(name + ".running_var", running_var);
  }
}

std::size_t USConvLayer::param_count(std::span<const int> in_channels,
                                     int out_channels) const {
  std::size_t n = 0;
  for (int c : in_channels) {
    n += static_cast<std::size_t>(out_channels) * c * kernel * kernel;
  }
  n += out_channels;
  if (norm_act) n += 2 * static_cast<std::size_t>(out_channels);
  return n;
}

std::size_t USConvLayer::param_count() const {
  return param_count(in_max, out_max);
}

Var usconv_forward(USConvLayer& layer, std::span<const Var> inputs,
                   int out_channels, const ForwardContext& ctx) {
  if (inputs.size() != layer.weights.size()) {
    throw std::invalid_argument(layer.name + ": expected " +
                                std::to_string(layer.weights.size()) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  if (out_channels < 1 || out_channels > layer.out_max) {
    throw std::invalid_argument(layer.name + ": output width " +
                                std::to_string(out_channels) + " outside [1," +
                                std::to_string(layer.out_max) + "]");
  }
  const int pad = layer.kernel / 2;
  Var acc;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const int cin = inputs[i]->shape().c;
    if (cin < 1 || cin > layer.in_max[i]) {
      throw std::invalid_argument(layer.name + ": input " + std::to_string(i) +
                                  " has " + std::to_string(cin) +
                                  " channels, layer holds at most " +
                                  std::to_string(layer.in_max[i]));
    }
    Var w = use_parameter(layer.weights[i],
                          Shape{out_channels, cin, layer.kernel, layer.kernel});
    Var b = i == 0 ? use_parameter(layer.bias, Shape{out_channels, 1, 1, 1}) : Var{};
    Var y = ops::conv2d(inputs[i], w, b, layer.stride, pad);
    acc = acc ? ops::add(acc, y) : y;
  }
  if (!layer.norm_act) return acc;
  const Shape vec{out_channels, 1, 1, 1};
  ops::NormState state;
  state.running_mean = layer.running_mean.data();
  state.running_var = layer.running_var.data();
  state.mode = ctx.mode;
  state.momentum = ctx.momentum;
  state.recalib_step = ctx.recalib_step;
  Var y = ops::batch_norm(acc, use_parameter(layer.norm_scale, vec),
                          use_parameter(layer.norm_shift, vec), state);
  return ops::silu(y);
}

Var usconv_forward(USConvLayer& layer, const Var& x, int out_channels,
                   const ForwardContext& ctx) {
  return usconv_forward(layer, std::span<const Var>(&x, 1), out_channels, ctx);
}

Var usconv_forward(USConvLayer& layer, const Var& x, WidthChoice in_fraction,
                   WidthChoice out_fraction, const ForwardContext& ctx) {
  if (layer.in_max.size() != 1) {
    throw std::invalid_argument(layer.name + ": fraction form needs one input");
  }
  const int cin = in_fraction.realize(layer.in_max[0]);
  if (x->shape().c != cin) {
    throw std::invalid_argument(layer.name + ": input has " +
                                std::to_string(x->shape().c) +
                                " channels but in_fraction realizes " +
                                std::to_string(cin));
  }
  return usconv_forward(layer, x, out_fraction.realize(layer.out_max), ctx);
}

}  // namespace radnas::nn
