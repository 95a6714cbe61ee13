#include "radnas/nn/attention.hpp"

#include <algorithm>
#include <stdexcept>

namespace radnas::nn {

int attention_mid_channels(int channels) { return std::max(8, channels / 8); }

CoordAttention CoordAttention::create(const std::string& name, int channels_max,
                                      std::mt19937_64& rng) {
  CoordAttention attn;
  attn.channels_max = channels_max;
  attn.mid_max = attention_mid_channels(channels_max);
  attn.reduce = USConvLayer::create(name + ".reduce", {channels_max},
                                    attn.mid_max, 1, 1, true, rng);
  attn.gate_h = USConvLayer::create(name + ".gate_h", {attn.mid_max},
                                    channels_max, 1, 1, false, rng);
  attn.gate_w = USConvLayer::create(name + ".gate_w", {attn.mid_max},
                                    channels_max, 1, 1, false, rng);
  return attn;
}

void CoordAttention::visit(const TensorVisitor& v) {
  reduce.visit(v);
  gate_h.visit(v);
  gate_w.visit(v);
}

AttentionGates coordinate_attention_gates(CoordAttention& attn, const Var& x,
                                          const ForwardContext& ctx) {
  const Shape s = x->shape();
  if (s.c < 1 || s.c > attn.channels_max) {
    throw std::invalid_argument("coordinate_attention: " + std::to_string(s.c) +
                                " channels, module holds " +
                                std::to_string(attn.channels_max));
  }
  const int mid = std::min(attn.mid_max, attention_mid_channels(s.c));
  Var pooled = ops::coord_pool(x);  // {N,C,H+W,1}
  Var y = usconv_forward(attn.reduce, pooled, mid, ctx);
  Var yh = ops::take_rows(y, 0, s.h);
  Var yw = ops::take_rows(y, s.h, s.w);
  return {ops::sigmoid(usconv_forward(attn.gate_h, yh, s.c, ctx)),
          ops::sigmoid(usconv_forward(attn.gate_w, yw, s.c, ctx))};
}

Var coordinate_attention(CoordAttention& attn, const Var& x,
                         const ForwardContext& ctx) {
  auto gates = coordinate_attention_gates(attn, x, ctx);
  return ops::coord_gate(x, gates.gate_h, gates.gate_w);
}

}  // namespace radnas::nn
