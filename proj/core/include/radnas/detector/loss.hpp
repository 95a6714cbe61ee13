#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "radnas/detector/model.hpp"

namespace radnas::detector {

inline constexpr double kBoxLossWeight = 5.0;
inline constexpr double kCiouEps = 1e-9;

struct LossBreakdown {
  double cls_loss = 0;
  double box_loss = 0;
  double total = 0;
  int num_positive = 0;
  Var total_var;  // scalar node for backward
};

// Grid extents of one scale.
struct GridSize {
  int h = 0;
  int w = 0;
};

struct Assignment {
  int scale = 0;  // 0: stride 8, 1: 16, 2: 32
  int gy = 0;
  int gx = 0;
  int gt = 0;  // index into the image's annotation list
};

// Each box picks the finest scale whose 4x4-cell neighbourhood strictly
// exceeds the box extent (ties fall to the coarser scale), or the coarsest
// scale otherwise, and claims the cell holding its center there. When two
// boxes claim one cell the smaller box keeps it.
std::vector<Assignment> assign_targets(const std::array<GridSize, 3>& grids,
                                       const std::vector<io::Annotation>& labels);

inline double value_of(double x) { return x; }

// Complete IoU of corner boxes. Templated so the same expression serves
// plain doubles and forward-mode duals; alpha is treated as a constant.
template <typename T>
T ciou(const std::array<T, 4>& p, const std::array<double, 4>& g) {
  using std::atan;
  using std::max;
  using std::min;
  const T iw = max(T(0.0), min(p[2], T(g[2])) - max(p[0], T(g[0])));
  const T ih = max(T(0.0), min(p[3], T(g[3])) - max(p[1], T(g[1])));
  const T inter = iw * ih;
  const T pw = p[2] - p[0];
  const T ph = p[3] - p[1];
  const double gw = g[2] - g[0];
  const double gh = g[3] - g[1];
  const T uni = pw * ph + T(gw * gh) - inter + T(kCiouEps);
  const T iou = inter / uni;
  const T cw = max(p[2], T(g[2])) - min(p[0], T(g[0]));
  const T ch = max(p[3], T(g[3])) - min(p[1], T(g[1]));
  const T c2 = cw * cw + ch * ch + T(kCiouEps);
  const T dx = (p[0] + p[2]) - T(g[0] + g[2]);
  const T dy = (p[1] + p[3]) - T(g[1] + g[3]);
  const T rho2 = (dx * dx + dy * dy) * T(0.25);
  const T dv = atan(T(gw / (gh + kCiouEps))) - atan(pw / (ph + T(kCiouEps)));
  const T v = T(4.0 / (std::numbers::pi * std::numbers::pi)) * dv * dv;
  const double alpha = value_of(v) / (1.0 - value_of(iou) + value_of(v) + kCiouEps);
  return iou - rho2 / c2 - T(alpha) * v;
}

// Target box for an assignment in the cell units of its scale, with the
// matching prediction (l, t, r, b) measured from the cell center.
std::array<double, 4> target_box_cells(const io::Annotation& a, const GridSize& g);

// cls = sum of BCE over every cell and class / max(1, positives);
// box = mean over positives of 1 - CIoU; total = cls + 5 * box.
LossBreakdown compute_loss(const DetectionOutput& out,
                           const std::vector<std::vector<io::Annotation>>& labels);

}  // namespace radnas::detector
