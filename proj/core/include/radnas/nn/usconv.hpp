#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "radnas/autograd.hpp"
#include "radnas/ops.hpp"

namespace radnas::nn {

// How normalization layers behave during a forward pass.
struct ForwardContext {
  ops::NormMode mode = ops::NormMode::kEval;
  double momentum = 0.03;
  int recalib_step = 0;

  static ForwardContext train() { return {ops::NormMode::kTrain}; }
  static ForwardContext eval() { return {ops::NormMode::kEval}; }
  static ForwardContext recalibrate(int step) {
    return {ops::NormMode::kRecalibrate, 0.03, step};
  }
};

// Fraction of a layer's full width; realized as max(1, round(f * C_max)).
struct WidthChoice {
  double fraction = 1.0;
  int realize(int channels_max) const;
};
int realized_channels(double fraction, int channels_max);

struct TensorVisitor {
  std::function<void(Parameter&)> on_param;
  std::function<void(const std::string&, Tensor&)> on_buffer;
};

// Elastic-width convolution + bias, optionally followed by batch norm and
// SiLU. A layer may take several input tensors whose contributions are summed
// (a convolution over their channel concatenation); each input keeps its own
// weight so every tensor slices as a prefix.
struct USConvLayer {
  std::string name;
  int out_max = 0;
  std::vector<int> in_max;
  int kernel = 1;
  int stride = 1;
  bool norm_act = true;

  std::vector<Parameter> weights;  // [out_max x in_max[i] x k x k]
  Parameter bias;                  // {out_max,1,1,1}
  Parameter norm_scale;
  Parameter norm_shift;
  Tensor running_mean;
  Tensor running_var;

  static USConvLayer create(std::string name, std::vector<int> in_max,
                            int out_max, int kernel, int stride, bool norm_act,
                            std::mt19937_64& rng);

  void visit(const TensorVisitor& v);
  // Parameters of the slice with the given channel counts.
  std::size_t param_count(std::span<const int> in_channels,
                          int out_channels) const;
  std::size_t param_count() const;
};

Var usconv_forward(USConvLayer& layer, std::span<const Var> inputs,
                   int out_channels, const ForwardContext& ctx);
Var usconv_forward(USConvLayer& layer, const Var& x, int out_channels,
                   const ForwardContext& ctx);
// Width-fraction form; rejects x whose channel count differs from the
// realized input width.
Var usconv_forward(USConvLayer& layer, const Var& x, WidthChoice in_fraction,
                   WidthChoice out_fraction, const ForwardContext& ctx);

}  // namespace radnas::nn
