#pragma once

#include "radnas/nn/usconv.hpp"

namespace radnas::nn {

// Coordinate attention: directional average pools, a shared 1x1 bottleneck
// with batch norm and SiLU, then per-direction sigmoid gates.
struct CoordAttention {
  int channels_max = 0;
  int mid_max = 0;
  USConvLayer reduce;  // C -> mid, norm + SiLU
  USConvLayer gate_h;  // mid -> C, bias only
  USConvLayer gate_w;  // mid -> C, bias only

  static CoordAttention create(const std::string& name, int channels_max,
                               std::mt19937_64& rng);
  void visit(const TensorVisitor& v);
};

// Bottleneck width for `channels` with reduction ratio 8 and a floor of 8.
int attention_mid_channels(int channels);

Var coordinate_attention(CoordAttention& attn, const Var& x,
                         const ForwardContext& ctx);

// Gate tensors exposed for tests: g_h {N,C,H,1} and g_w {N,C,W,1}.
struct AttentionGates {
  Var gate_h;
  Var gate_w;
};
AttentionGates coordinate_attention_gates(CoordAttention& attn, const Var& x,
                                          const ForwardContext& ctx);

}  // namespace radnas::nn
