#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "radnas/autograd.hpp"
#include "radnas/tensor.hpp"

namespace oracle {

// Direct zero-padded convolution, weight {Co,Ci,k,k}, bias {Co}.
inline radnas::Tensor conv2d(const radnas::Tensor& x, const radnas::Tensor& w,
                             const std::vector<double>& bias, int stride, int pad) {
  const auto xs = x.shape();
  const auto ws = w.shape();
  const int k = ws.h;
  const int oh = (xs.h + 2 * pad - k) / stride + 1;
  const int ow = (xs.w + 2 * pad - k) / stride + 1;
  radnas::Tensor y({xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int c = 0; c < ws.c; ++c)
            for (int a = 0; a < k; ++a)
              for (int b = 0; b < k; ++b) {
                const int yy = i * stride + a - pad;
                const int xx = j * stride + b - pad;
                if (yy < 0 || yy >= xs.h || xx < 0 || xx >= xs.w) continue;
                acc += w.at(o, c, a, b) * x.at(n, c, yy, xx);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Inference-mode normalization with running statistics, then SiLU.
inline radnas::Tensor norm_silu(const radnas::Tensor& x, const std::vector<double>& scale,
                                const std::vector<double>& shift,
                                const std::vector<double>& mean,
                                const std::vector<double>& var, double eps) {
  radnas::Tensor y(x.shape());
  const auto s = x.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) {
          const double z = (x.at(n, c, i, j) - mean[c]) / std::sqrt(var[c] + eps) * scale[c] +
                           shift[c];
          y.at(n, c, i, j) = silu(z);
        }
  return y;
}

// O(N^2) two-dimensional DFT magnitude of a [rows x cols] complex grid
// laid out row-major; DFT along cols first, then along rows.
inline std::vector<double> dft2_magnitude(const std::vector<std::complex<double>>& x, int rows,
                                          int cols) {
  using C = std::complex<double>;
  const double tau = 2.0 * std::numbers::pi;
  std::vector<C> a(x.size());
  for (int r = 0; r < rows; ++r)
    for (int k = 0; k < cols; ++k) {
      C acc = 0;
      for (int t = 0; t < cols; ++t)
        acc += x[r * cols + t] * std::polar(1.0, -tau * k * t / cols);
      a[r * cols + k] = acc;
    }
  std::vector<double> mag(x.size());
  for (int k = 0; k < cols; ++k)
    for (int d = 0; d < rows; ++d) {
      C acc = 0;
      for (int r = 0; r < rows; ++r) acc += a[r * cols + k] * std::polar(1.0, -tau * d * r / rows);
      mag[d * cols + k] = std::abs(acc);
    }
  return mag;
}

// Central difference of f with respect to element i of t.
inline double central_difference(radnas::Tensor& t, std::size_t i,
                                 const std::function<double()>& f, double h) {
  const double saved = t[i];
  t[i] = saved + h;
  const double up = f();
  t[i] = saved - h;
  const double down = f();
  t[i] = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

inline radnas::Tensor random_tensor(radnas::Shape s, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  radnas::Tensor t(s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() /
                     ("radnas_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace oracle
