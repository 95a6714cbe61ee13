#include "radnas/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radnas::ops {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (!(a->shape() == b->shape())) {
    throw std::invalid_argument(std::string(op) + ": shape " +
                                a->shape().str() + " vs " + b->shape().str());
  }
}

struct ConvGeometry {
  int n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t k() const { return static_cast<std::size_t>(cin) * kh * kw; }
  std::size_t p() const { return static_cast<std::size_t>(ho) * wo; }
  bool direct() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
  for (int c = 0; c < g.cin; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw +
                             j) * g.p();
        const double* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + i;
          double* dst = row + static_cast<std::size_t>(oh) * g.wo;
          if (ih < 0 || ih >= g.h) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.w;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + j;
            dst[ow] = (iw >= 0 && iw < g.w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* dx) {
  for (int c = 0; c < g.cin; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row =
            col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * g.p();
        double* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + i;
          if (ih < 0 || ih >= g.h) continue;
          const double* src = row + static_cast<std::size_t>(oh) * g.wo;
          double* dst = plane + static_cast<std::size_t>(ih) * g.w;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + j;
            if (iw >= 0 && iw < g.w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x->value[i]);
  return make_node(std::move(out), {x}, [deriv](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
    }
  });
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int pad) {
  const Shape xs = x->shape();
  const Shape ws = weight->shape();
  if (xs.c != ws.c) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(xs.c) +
                                " channels, weight expects " +
                                std::to_string(ws.c));
  }
  ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, ws.w, stride, pad, 0, 0};
  g.ho = (xs.h + 2 * pad - ws.h) / stride + 1;
  g.wo = (xs.w + 2 * pad - ws.w) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) {
    throw std::invalid_argument("conv2d: empty output for input " + xs.str());
  }
  if (bias && bias->value.size() != static_cast<std::size_t>(ws.n)) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }

  Tensor out(Shape{g.n, g.cout, g.ho, g.wo});
  AlignedVector col(g.direct() ? 0 : g.k() * g.p());
  const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
  const std::size_t out_stride = static_cast<std::size_t>(g.cout) * g.p();
  ConstMapMat wmat(weight->value.data(), g.cout, g.k());
  for (int n = 0; n < g.n; ++n) {
    const double* xn = x->value.data() + n * in_stride;
    const double* cp = xn;
    if (!g.direct()) {
      im2col(xn, g, col.data());
      cp = col.data();
    }
    MapMat omat(out.data() + n * out_stride, g.cout, g.p());
    omat.noalias() = wmat * ConstMapMat(cp, g.k(), g.p());
    if (bias) {
      for (int c = 0; c < g.cout; ++c) omat.row(c).array() += bias->value[c];
    }
  }

  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return make_node(std::move(out), std::move(parents), [g](Node& self) {
    Node& xin = *self.parents[0];
    Node& win = *self.parents[1];
    Node* bin = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const std::size_t in_stride = static_cast<std::size_t>(g.cin) * g.h * g.w;
    const std::size_t out_stride = static_cast<std::size_t>(g.cout) * g.p();
    AlignedVector col(g.direct() ? 0 : g.k() * g.p());
    AlignedVector dcol(g.direct() ? 0 : g.k() * g.p());
    ConstMapMat wmat(win.value.data(), g.cout, g.k());
    for (int n = 0; n < g.n; ++n) {
      ConstMapMat dout(self.grad.data() + n * out_stride, g.cout, g.p());
      const double* xn = xin.value.data() + n * in_stride;
      if (win.requires_grad) {
        const double* cp = xn;
        if (!g.direct()) {
          im2col(xn, g, col.data());
          cp = col.data();
        }
        MapMat dw(win.grad_buffer().data(), g.cout, g.k());
        dw.noalias() += dout * ConstMapMat(cp, g.k(), g.p()).transpose();
      }
      if (xin.requires_grad) {
        double* dxn = xin.grad_buffer().data() + n * in_stride;
        if (g.direct()) {
          MapMat dx(dxn, g.k(), g.p());
          dx.noalias() += wmat.transpose() * dout;
        } else {
          MapMat dc(dcol.data(), g.k(), g.p());
          dc.noalias() = wmat.transpose() * dout;
          col2im_add(dcol.data(), g, dxn);
        }
      }
      if (bin && bin->requires_grad) {
        Tensor& db = bin->grad_buffer();
        for (int c = 0; c < g.cout; ++c) db[c] += dout.row(c).sum();
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a->value[i] + b->value[i];
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a->value[i] * b->value[i];
  }
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * pb.value[i];
      }
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * pa.value[i];
      }
    }
  });
}

Var scale(const Var& x, const Var& s) {
  if (s->value.size() != 1) {
    throw std::invalid_argument("scale: factor must be a scalar");
  }
  const double k = s->value[0];
  Tensor out(x->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * k;
  return make_node(std::move(out), {x, s}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    if (px.requires_grad) {
      Tensor& g = px.grad_buffer();
      const double k = ps.value[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        acc += self.grad[i] * px.value[i];
      }
      ps.grad_buffer()[0] += acc;
    }
  });
}

Var mul_channel(const Var& x, const Var& gate) {
  const Shape xs = x->shape();
  const Shape gs = gate->shape();
  if (gs.n != xs.n || gs.c != xs.c || gs.h != 1 || gs.w != 1) {
    throw std::invalid_argument("mul_channel: gate " + gs.str() +
                                " does not match " + xs.str());
  }
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor out(xs);
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    const double k = gate->value[nc];
    for (std::size_t i = 0; i < plane; ++i) {
      out[nc * plane + i] = x->value[nc * plane + i] * k;
    }
  }
  return make_node(std::move(out), {x, gate}, [plane](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    const std::size_t planes = pg.value.size();
    for (std::size_t nc = 0; nc < planes; ++nc) {
      const double* dy = self.grad.data() + nc * plane;
      if (px.requires_grad) {
        double* dx = px.grad_buffer().data() + nc * plane;
        for (std::size_t i = 0; i < plane; ++i) dx[i] += dy[i] * pg.value[nc];
      }
      if (pg.requires_grad) {
        const double* xv = px.value.data() + nc * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += dy[i] * xv[i];
        pg.grad_buffer()[nc] += acc;
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape xs = x->shape();
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor out(Shape{xs.n, xs.c, 1, 1});
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += x->value[nc * plane + i];
    out[nc] = acc / static_cast<double>(plane);
  }
  return make_node(std::move(out), {x}, [plane](Node& self) {
    Node& px = *self.parents[0];
    Tensor& g = px.grad_buffer();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
      for (std::size_t i = 0; i < plane; ++i) {
        g[nc * plane + i] += self.grad[nc] * inv;
      }
    }
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x->value.values()) acc += v;
  return make_node(Tensor(Shape{}, acc), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    Tensor& g = px.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v * stable_sigmoid(v); },
      [](double v, double) {
        const double s = stable_sigmoid(v);
        return s + v * s * (1.0 - s);
      });
}

Var softplus(const Var& x) {
  return unary(
      x,
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return stable_sigmoid(v); });
}

Var batch_norm(const Var& x, const Var& scale_v, const Var& shift_v,
               const NormState& state) {
  const Shape xs = x->shape();
  const int channels = xs.c;
  if (scale_v->value.size() != static_cast<std::size_t>(channels) ||
      shift_v->value.size() != static_cast<std::size_t>(channels)) {
    throw std::invalid_argument("batch_norm: affine size mismatch for " +
                                xs.str());
  }
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  const std::size_t count = plane * xs.n;
  std::vector<double> mean(channels), inv_std(channels);
  const bool batch_stats = state.mode != NormMode::kEval;

  for (int c = 0; c < channels; ++c) {
    if (!batch_stats) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
      continue;
    }
    double m = 0.0;
    for (int n = 0; n < xs.n; ++n) {
      const double* p = x->value.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) m += p[i];
    }
    m /= static_cast<double>(count);
    double v = 0.0;
    for (int n = 0; n < xs.n; ++n) {
      const double* p = x->value.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
    }
    const double biased = v / static_cast<double>(count);
    const double unbiased =
        count > 1 ? v / static_cast<double>(count - 1) : biased;
    mean[c] = m;
    inv_std[c] = 1.0 / std::sqrt(biased + state.eps);
    if (state.mode == NormMode::kTrain) {
      state.running_mean[c] =
          (1.0 - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] +
                             state.momentum * unbiased;
    } else {
      const double k = 1.0 / static_cast<double>(state.recalib_step + 1);
      state.running_mean[c] += (m - state.running_mean[c]) * k;
      state.running_var[c] += (unbiased - state.running_var[c]) * k;
    }
  }

  Tensor out(xs);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
      const double a = scale_v->value[c] * inv_std[c];
      const double b = shift_v->value[c] - a * mean[c];
      for (std::size_t i = 0; i < plane; ++i) {
        out[base + i] = a * x->value[base + i] + b;
      }
    }
  }

  return make_node(
      std::move(out), {x, scale_v, shift_v},
      [mean, inv_std, batch_stats, plane, count](Node& self) {
        Node& px = *self.parents[0];
        Node& ps = *self.parents[1];
        Node& pb = *self.parents[2];
        const Shape xs = px.shape();
        for (int c = 0; c < xs.c; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int n = 0; n < xs.n; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double xhat = (px.value[base + i] - mean[c]) * inv_std[c];
              sum_dy += self.grad[base + i];
              sum_dy_xhat += self.grad[base + i] * xhat;
            }
          }
          if (ps.requires_grad) ps.grad_buffer()[c] += sum_dy_xhat;
          if (pb.requires_grad) pb.grad_buffer()[c] += sum_dy;
          if (!px.requires_grad) continue;
          Tensor& dx = px.grad_buffer();
          const double k = ps.value[c] * inv_std[c];
          const double inv_count = 1.0 / static_cast<double>(count);
          for (int n = 0; n < xs.n; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double dy = self.grad[base + i];
              if (batch_stats) {
                const double xhat = (px.value[base + i] - mean[c]) * inv_std[c];
                dx[base + i] +=
                    k * (dy - inv_count * sum_dy - xhat * inv_count * sum_dy_xhat);
              } else {
                dx[base + i] += k * dy;
              }
            }
          }
        }
      });
}

namespace {

struct Lerp {
  int i0, i1;
  double t;
};

std::vector<Lerp> lerp_table(int in, int out) {
  std::vector<Lerp> table(out);
  const double ratio = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    table[d] = {i0, i1, src - i0};
  }
  return table;
}

}  // namespace

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Shape xs = x->shape();
  if (xs.h == out_h && xs.w == out_w) return x;
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("resize_bilinear: empty target size");
  }
  auto th = lerp_table(xs.h, out_h);
  auto tw = lerp_table(xs.w, out_w);
  Tensor out(Shape{xs.n, xs.c, out_h, out_w});
  const std::size_t in_plane = static_cast<std::size_t>(xs.h) * xs.w;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    const double* src = x->value.data() + nc * in_plane;
    double* dst = out.data() + nc * out_plane;
    for (int i = 0; i < out_h; ++i) {
      const Lerp& a = th[i];
      for (int j = 0; j < out_w; ++j) {
        const Lerp& b = tw[j];
        const double top = src[a.i0 * xs.w + b.i0] * (1 - b.t) +
                           src[a.i0 * xs.w + b.i1] * b.t;
        const double bot = src[a.i1 * xs.w + b.i0] * (1 - b.t) +
                           src[a.i1 * xs.w + b.i1] * b.t;
        dst[i * out_w + j] = top * (1 - a.t) + bot * a.t;
      }
    }
  }
  return make_node(
      std::move(out), {x},
      [th = std::move(th), tw = std::move(tw), in_plane, out_plane](Node& self) {
        Node& px = *self.parents[0];
        const Shape xs = px.shape();
        Tensor& g = px.grad_buffer();
        const int out_h = static_cast<int>(th.size());
        const int out_w = static_cast<int>(tw.size());
        for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c;
             ++nc) {
          double* dsrc = g.data() + nc * in_plane;
          const double* dy = self.grad.data() + nc * out_plane;
          for (int i = 0; i < out_h; ++i) {
            const Lerp& a = th[i];
            for (int j = 0; j < out_w; ++j) {
              const Lerp& b = tw[j];
              const double v = dy[i * out_w + j];
              dsrc[a.i0 * xs.w + b.i0] += v * (1 - a.t) * (1 - b.t);
              dsrc[a.i0 * xs.w + b.i1] += v * (1 - a.t) * b.t;
              dsrc[a.i1 * xs.w + b.i0] += v * a.t * (1 - b.t);
              dsrc[a.i1 * xs.w + b.i1] += v * a.t * b.t;
            }
          }
        }
      });
}

Var coord_pool(const Var& x) {
  const Shape xs = x->shape();
  const int rows = xs.h + xs.w;
  Tensor out(Shape{xs.n, xs.c, rows, 1});
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    const double* src = x->value.data() + nc * plane;
    double* dst = out.data() + nc * rows;
    for (int i = 0; i < xs.h; ++i) {
      double acc = 0.0;
      for (int j = 0; j < xs.w; ++j) acc += src[i * xs.w + j];
      dst[i] = acc / xs.w;
    }
    for (int j = 0; j < xs.w; ++j) {
      double acc = 0.0;
      for (int i = 0; i < xs.h; ++i) acc += src[i * xs.w + j];
      dst[xs.h + j] = acc / xs.h;
    }
  }
  return make_node(std::move(out), {x}, [plane, rows](Node& self) {
    Node& px = *self.parents[0];
    const Shape xs = px.shape();
    Tensor& g = px.grad_buffer();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
      const double* dy = self.grad.data() + nc * rows;
      double* dx = g.data() + nc * plane;
      for (int i = 0; i < xs.h; ++i) {
        for (int j = 0; j < xs.w; ++j) {
          dx[i * xs.w + j] += dy[i] / xs.w + dy[xs.h + j] / xs.h;
        }
      }
    }
  });
}

Var take_rows(const Var& x, int begin, int count) {
  const Shape xs = x->shape();
  if (xs.w != 1 || begin < 0 || begin + count > xs.h || count <= 0) {
    throw std::invalid_argument("take_rows: bad range on " + xs.str());
  }
  Tensor out(Shape{xs.n, xs.c, count, 1});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    std::copy_n(x->value.data() + nc * xs.h + begin, count,
                out.data() + nc * count);
  }
  return make_node(std::move(out), {x}, [begin, count](Node& self) {
    Node& px = *self.parents[0];
    const Shape xs = px.shape();
    Tensor& g = px.grad_buffer();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
      for (int r = 0; r < count; ++r) {
        g[nc * xs.h + begin + r] += self.grad[nc * count + r];
      }
    }
  });
}

Var coord_gate(const Var& x, const Var& gh, const Var& gw) {
  const Shape xs = x->shape();
  if (!(gh->shape() == Shape{xs.n, xs.c, xs.h, 1}) ||
      !(gw->shape() == Shape{xs.n, xs.c, xs.w, 1})) {
    throw std::invalid_argument("coord_gate: gate shapes do not match " +
                                xs.str());
  }
  const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor out(xs);
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
    const double* src = x->value.data() + nc * plane;
    const double* a = gh->value.data() + nc * xs.h;
    const double* b = gw->value.data() + nc * xs.w;
    double* dst = out.data() + nc * plane;
    for (int i = 0; i < xs.h; ++i) {
      for (int j = 0; j < xs.w; ++j) {
        dst[i * xs.w + j] = src[i * xs.w + j] * a[i] * b[j];
      }
    }
  }
  return make_node(std::move(out), {x, gh, gw}, [plane](Node& self) {
    Node& px = *self.parents[0];
    Node& ph = *self.parents[1];
    Node& pw = *self.parents[2];
    const Shape xs = px.shape();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(xs.n) * xs.c; ++nc) {
      const double* src = px.value.data() + nc * plane;
      const double* a = ph.value.data() + nc * xs.h;
      const double* b = pw.value.data() + nc * xs.w;
      const double* dy = self.grad.data() + nc * plane;
      double* dx = px.requires_grad ? px.grad_buffer().data() + nc * plane : nullptr;
      double* da = ph.requires_grad ? ph.grad_buffer().data() + nc * xs.h : nullptr;
      double* db = pw.requires_grad ? pw.grad_buffer().data() + nc * xs.w : nullptr;
      for (int i = 0; i < xs.h; ++i) {
        for (int j = 0; j < xs.w; ++j) {
          const double g = dy[i * xs.w + j];
          const double v = src[i * xs.w + j];
          if (dx) dx[i * xs.w + j] += g * a[i] * b[j];
          if (da) da[i] += g * v * b[j];
          if (db) db[j] += g * v * a[i];
        }
      }
    }
  });
}

Tensor flip_w(const Tensor& x) {
  const Shape s = x.shape();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int h = 0; h < s.h; ++h) {
        for (int w = 0; w < s.w; ++w) {
          out.at(n, c, h, w) = x.at(n, c, h, s.w - 1 - w);
        }
      }
    }
  }
  return out;
}

}  // namespace radnas::ops
