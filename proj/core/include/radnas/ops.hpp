#pragma once

#include "radnas/autograd.hpp"

namespace radnas::ops {

// 2-D cross-correlation, NCHW input, weight [Cout x Cin x k x k], optional
// bias {Cout,1,1,1}. Padding is applied symmetrically with zeros.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int pad);

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// x * s where s is a scalar node.
Var scale(const Var& x, const Var& s);
// x[n,c,:,:] * g[n,c,0,0]
Var mul_channel(const Var& x, const Var& g);
// Mean over H and W, output [N,C,1,1].
Var global_avg_pool(const Var& x);
Var sum(const Var& x);

Var sigmoid(const Var& x);
Var silu(const Var& x);
Var softplus(const Var& x);

enum class NormMode {
  kTrain,        // batch statistics, exponential update of running stats
  kEval,         // running statistics
  kRecalibrate,  // batch statistics, cumulative average into running stats
};

struct NormState {
  double* running_mean = nullptr;  // at least C entries
  double* running_var = nullptr;
  NormMode mode = NormMode::kEval;
  double momentum = 0.03;
  double eps = 1e-3;
  int recalib_step = 0;  // 0-based index of the current recalibration batch
};

// Per-channel normalization over (N,H,W); scale/shift are {C,1,1,1}.
Var batch_norm(const Var& x, const Var& scale, const Var& shift,
               const NormState& state);

// Bilinear interpolation with half-pixel centers (align_corners = false).
// Identity when the size is unchanged.
Var resize_bilinear(const Var& x, int out_h, int out_w);

// Coordinate pooling: rows [0,H) hold means over W, rows [H,H+W) hold means
// over H. Output [N,C,H+W,1].
Var coord_pool(const Var& x);
// Rows [begin, begin+count) of a [N,C,R,1] tensor.
Var take_rows(const Var& x, int begin, int count);
// x[n,c,i,j] * gh[n,c,i,0] * gw[n,c,j,0]
Var coord_gate(const Var& x, const Var& gh, const Var& gw);

// Mirrors along W (the Doppler axis).
Tensor flip_w(const Tensor& x);

}  // namespace radnas::ops
