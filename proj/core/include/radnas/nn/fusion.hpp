#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "radnas/nn/attention.hpp"

namespace radnas::nn {

enum class FusionOption : int {
  kGated = 1,     // primary + sigmoid(gamma * GAP(F_aux)) * F_aux
  kSum = 2,       // primary + F_aux
  kWeighted = 3,  // primary + lambda * F_aux
};

FusionOption fusion_option_from_int(int value);

// Primary-auxiliary fusion parameters. gamma exists iff the gated option is
// available at this site, lambda iff the weighted option is.
struct FusionParams {
  USConvLayer aux_proj;  // 1x1, aux channels -> primary channels
  std::optional<Parameter> gamma;
  std::optional<Parameter> lambda;

  static FusionParams create(const std::string& name, int aux_max,
                             int primary_max,
                             const std::vector<FusionOption>& options,
                             std::mt19937_64& rng);
  void visit(const TensorVisitor& v);
};

// F_aux = bilinear_resize(aux_proj(aux)) to the primary's shape, combined per
// `option`. Output has the primary's shape.
Var primary_aux_fuse(const Var& primary, const Var& aux, FusionOption option,
                     FusionParams& params, const ForwardContext& ctx);

// The per-channel weighting factor w of the gated option, {N,C,1,1}.
Var fusion_weight(const Var& projected_aux, FusionParams& params);

struct ExchangerParams {
  int mode = 1;  // 1: heat stream is primary, 2: gray stream is primary
  FusionOption fusion_option = FusionOption::kGated;
  FusionParams fusion;
  Parameter alpha;  // scalar, initialized to 0
  CoordAttention attention;

  // primary_max/aux_max are the full widths of the primary and auxiliary
  // streams for this mode.
  static ExchangerParams create(const std::string& name, int mode,
                                int primary_max, int aux_max,
                                const std::vector<FusionOption>& options,
                                std::mt19937_64& rng);
  void visit(const TensorVisitor& v);
};

// Returns (heat_out, gray_out); only the primary stream is updated:
// primary + alpha * Attention(fuse(primary, aux)).
std::pair<Var, Var> exchanger_forward(const Var& heat, const Var& gray,
                                      ExchangerParams& params,
                                      FusionOption option,
                                      const ForwardContext& ctx);
std::pair<Var, Var> exchanger_forward(const Var& heat, const Var& gray,
                                      ExchangerParams& params,
                                      const ForwardContext& ctx);

}  // namespace radnas::nn
