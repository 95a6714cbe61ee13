#include "radnas/nn/fusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace radnas::nn {

FusionOption fusion_option_from_int(int value) {
  if (value < 1 || value > 3) {
    throw std::invalid_argument("fusion option " + std::to_string(value) +
                                " not in {1,2,3}");
  }
  return static_cast<FusionOption>(value);
}

FusionParams FusionParams::create(const std::string& name, int aux_max,
                                  int primary_max,
                                  const std::vector<FusionOption>& options,
                                  std::mt19937_64& rng) {
  FusionParams p;
  p.aux_proj = USConvLayer::create(name + ".aux_proj", {aux_max}, primary_max,
                                   1, 1, true, rng);
  auto has = [&](FusionOption o) {
    return std::find(options.begin(), options.end(), o) != options.end();
  };
  if (has(FusionOption::kGated)) {
    p.gamma = Parameter(name + ".gamma", Shape{}, false);
  }
  if (has(FusionOption::kWeighted)) {
    p.lambda = Parameter(name + ".lambda", Shape{}, false);
  }
  return p;
}

void FusionParams::visit(const TensorVisitor& v) {
  aux_proj.visit(v);
  if (v.on_param) {
    if (gamma) v.on_param(*gamma);
    if (lambda) v.on_param(*lambda);
  }
}

Var fusion_weight(const Var& projected_aux, FusionParams& params) {
  if (!params.gamma) {
    throw std::logic_error(params.aux_proj.name + ": gated fusion unavailable");
  }
  Var pooled = ops::global_avg_pool(projected_aux);
  return ops::sigmoid(ops::scale(pooled, use_parameter(*params.gamma)));
}

Var primary_aux_fuse(const Var& primary, const Var& aux, FusionOption option,
                     FusionParams& params, const ForwardContext& ctx) {
  const Shape ps = primary->shape();
  if (aux->shape().n != ps.n) {
    throw std::invalid_argument("primary_aux_fuse: batch size mismatch");
  }
  Var projected = usconv_forward(params.aux_proj, aux, ps.c, ctx);
  Var f_aux = ops::resize_bilinear(projected, ps.h, ps.w);
  switch (option) {
    case FusionOption::kGated:
      return ops::add(primary, ops::mul_channel(f_aux, fusion_weight(f_aux, params)));
    case FusionOption::kSum:
      return ops::add(primary, f_aux);
    case FusionOption::kWeighted:
      if (!params.lambda) {
        throw std::logic_error(params.aux_proj.name +
                               ": weighted fusion unavailable");
      }
      return ops::add(primary, ops::scale(f_aux, use_parameter(*params.lambda)));
  }
  throw std::invalid_argument("primary_aux_fuse: unknown option");
}

ExchangerParams ExchangerParams::create(const std::string& name, int mode,
                                        int primary_max, int aux_max,
                                        const std::vector<FusionOption>& options,
                                        std::mt19937_64& rng) {
  if (mode != 1 && mode != 2) {
    throw std::invalid_argument(name + ": exchanger mode must be 1 or 2");
  }
  if (options.empty()) throw std::invalid_argument(name + ": no fusion option");
  ExchangerParams p;
  p.mode = mode;
  p.fusion_option = options.front();
  p.fusion = FusionParams::create(name + ".fusion", aux_max, primary_max,
                                  options, rng);
  p.alpha = Parameter(name + ".alpha", Shape{}, false);
  p.attention = CoordAttention::create(name + ".attention", primary_max, rng);
  return p;
}

void ExchangerParams::visit(const TensorVisitor& v) {
  fusion.visit(v);
  if (v.on_param) v.on_param(alpha);
  attention.visit(v);
}

std::pair<Var, Var> exchanger_forward(const Var& heat, const Var& gray,
                                      ExchangerParams& params,
                                      FusionOption option,
                                      const ForwardContext& ctx) {
  if (params.mode != 1 && params.mode != 2) {
    throw std::invalid_argument("exchanger_forward: mode must be 1 or 2");
  }
  const bool heat_primary = params.mode == 1;
  const Var& primary = heat_primary ? heat : gray;
  const Var& aux = heat_primary ? gray : heat;
  Var fused = primary_aux_fuse(primary, aux, option, params.fusion, ctx);
  Var attended = coordinate_attention(params.attention, fused, ctx);
  Var updated = ops::add(primary, ops::scale(attended, use_parameter(params.alpha)));
  if (heat_primary) return {updated, gray};
  return {heat, updated};
}

std::pair<Var, Var> exchanger_forward(const Var& heat, const Var& gray,
                                      ExchangerParams& params,
                                      const ForwardContext& ctx) {
  return exchanger_forward(heat, gray, params, params.fusion_option, ctx);
}

}  // namespace radnas::nn
