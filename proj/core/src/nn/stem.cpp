#include "radnas/nn/stem.hpp"

#include <stdexcept>

namespace radnas::nn {

StemParams StemParams::create(const std::string& name, int in_channels,
                              const std::array<int, 3>& widths,
                              std::mt19937_64& rng) {
  constexpr int kStrides[3] = {2, 2, 1};
  StemParams p;
  int in = in_channels;
  for (int i = 0; i < 3; ++i) {
    p.convs[i] = USConvLayer::create(name + "." + std::to_string(i + 1), {in},
                                     widths[i], 3, kStrides[i], true, rng);
    in = widths[i];
  }
  return p;
}

void StemParams::visit(const TensorVisitor& v) {
  for (auto& c : convs) c.visit(v);
}

Var stem_forward(const Var& x, StemParams& params,
                 const std::array<int, 3>& channels, const ForwardContext& ctx) {
  const Shape s = x->shape();
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw std::invalid_argument("stem_forward: spatial size " +
                                std::to_string(s.h) + "x" + std::to_string(s.w) +
                                " not divisible by 4");
  }
  Var y = x;
  for (int i = 0; i < 3; ++i) {
    y = usconv_forward(params.convs[i], y, channels[i], ctx);
  }
  return y;
}

}  // namespace radnas::nn
