#pragma once

#include <array>

#include "radnas/nn/usconv.hpp"

namespace radnas::nn {

// Adapter stem: three 3x3 USConv layers with strides (2, 2, 1).
struct StemParams {
  std::array<USConvLayer, 3> convs;

  static StemParams create(const std::string& name, int in_channels,
                           const std::array<int, 3>& widths,
                           std::mt19937_64& rng);
  void visit(const TensorVisitor& v);
};

// Output is {N, channels[2], H/4, W/4}; H and W must be divisible by 4.
Var stem_forward(const Var& x, StemParams& params,
                 const std::array<int, 3>& channels, const ForwardContext& ctx);

}  // namespace radnas::nn
