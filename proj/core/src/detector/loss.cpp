#include "radnas/detector/loss.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace radnas::detector {

namespace {

// Forward-mode dual number carrying derivatives w.r.t. (l, t, r, b).
struct Dual {
  double v = 0;
  std::array<double, 4> d{};

  Dual() = default;
  explicit Dual(double x) : v(x) {}
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r(a.v / b.v);
  const double inv2 = 1.0 / (b.v * b.v);
  for (int i = 0; i < 4; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
  return r;
}
bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
Dual atan(const Dual& a) {
  Dual r(std::atan(a.v));
  const double s = 1.0 / (1.0 + a.v * a.v);
  for (int i = 0; i < 4; ++i) r.d[i] = a.d[i] * s;
  return r;
}
double value_of(const Dual& a) { return a.v; }

double bce_with_logits(double x, double t) {
  return std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int pick_scale(const std::array<GridSize, 3>& grids, const io::Annotation& a) {
  for (int s = 0; s < 3; ++s) {
    if (a.w < 4.0 / grids[s].w && a.h < 4.0 / grids[s].h) return s;
  }
  return 2;
}

}  // namespace

std::vector<Assignment> assign_targets(const std::array<GridSize, 3>& grids,
                                       const std::vector<io::Annotation>& labels) {
  std::map<std::array<int, 3>, int> owner;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const auto& a = labels[i];
    const int s = pick_scale(grids, a);
    const int gx = std::clamp(static_cast<int>(a.cx * grids[s].w), 0, grids[s].w - 1);
    const int gy = std::clamp(static_cast<int>(a.cy * grids[s].h), 0, grids[s].h - 1);
    const std::array<int, 3> key{s, gy, gx};
    auto it = owner.find(key);
    if (it == owner.end()) {
      owner.emplace(key, i);
    } else {
      const auto& prev = labels[it->second];
      if (a.w * a.h < prev.w * prev.h) it->second = i;
    }
  }
  std::vector<Assignment> out;
  for (const auto& [key, gt] : owner) out.push_back({key[0], key[1], key[2], gt});
  return out;
}

std::array<double, 4> target_box_cells(const io::Annotation& a, const GridSize& g) {
  return {(a.cx - a.w / 2) * g.w, (a.cy - a.h / 2) * g.h, (a.cx + a.w / 2) * g.w,
          (a.cy + a.h / 2) * g.h};
}

LossBreakdown compute_loss(const DetectionOutput& out,
                           const std::vector<std::vector<io::Annotation>>& labels) {
  const Shape s0 = out.cls[0]->shape();
  const int n = s0.n;
  const int k = s0.c;
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("compute_loss: " + std::to_string(labels.size()) +
                                " label lists for batch of " + std::to_string(n));
  }
  std::array<GridSize, 3> grids;
  for (int s = 0; s < 3; ++s) {
    grids[s] = {out.cls[s]->shape().h, out.cls[s]->shape().w};
  }

  struct Positive {
    int img, scale, gy, gx;
    std::array<double, 4> target;
    int cls;
  };
  std::vector<Positive> pos;
  for (int i = 0; i < n; ++i) {
    for (const auto& a : assign_targets(grids, labels[i])) {
      const auto& ann = labels[i][a.gt];
      if (ann.class_id < 0 || ann.class_id >= k) {
        throw std::invalid_argument("compute_loss: class id out of range");
      }
      pos.push_back({i, a.scale, a.gy, a.gx, target_box_cells(ann, grids[a.scale]),
                     ann.class_id});
    }
  }
  const int npos = static_cast<int>(pos.size());
  const double cls_norm = 1.0 / std::max(1, npos);

  // Classification targets: a dense 0/1 tensor per scale.
  std::array<Tensor, 3> targets;
  for (int s = 0; s < 3; ++s) targets[s] = Tensor(out.cls[s]->shape(), 0.0);
  for (const auto& p : pos) targets[p.scale].at(p.img, p.cls, p.gy, p.gx) = 1.0;

  double cls_sum = 0;
  for (int s = 0; s < 3; ++s) {
    const Tensor& x = out.cls[s]->value;
    for (std::size_t j = 0; j < x.size(); ++j) cls_sum += bce_with_logits(x[j], targets[s][j]);
  }
  const double cls_loss = cls_sum * cls_norm;

  // Box term with analytic (l, t, r, b) gradients from the dual evaluation.
  double box_sum = 0;
  std::vector<std::array<double, 4>> box_grads(pos.size());
  for (std::size_t j = 0; j < pos.size(); ++j) {
    const auto& p = pos[j];
    const Tensor& b = out.box[p.scale]->value;
    const double cx = p.gx + 0.5;
    const double cy = p.gy + 0.5;
    std::array<Dual, 4> dist;
    for (int c = 0; c < 4; ++c) {
      dist[c] = Dual(b.at(p.img, c, p.gy, p.gx));
      dist[c].d[c] = 1.0;
    }
    const std::array<Dual, 4> box{Dual(cx) - dist[0], Dual(cy) - dist[1],
                                  Dual(cx) + dist[2], Dual(cy) + dist[3]};
    const Dual c = ciou(box, p.target);
    box_sum += 1.0 - c.v;
    for (int q = 0; q < 4; ++q) box_grads[j][q] = -c.d[q];
  }
  const double box_norm = npos > 0 ? 1.0 / npos : 0.0;
  const double box_loss = box_sum * box_norm;

  LossBreakdown lb;
  lb.cls_loss = cls_loss;
  lb.box_loss = box_loss;
  lb.total = cls_loss + kBoxLossWeight * box_loss;
  lb.num_positive = npos;

  std::vector<Var> parents;
  for (int s = 0; s < 3; ++s) parents.push_back(out.cls[s]);
  for (int s = 0; s < 3; ++s) parents.push_back(out.box[s]);
  Tensor value(Shape{}, lb.total);
  lb.total_var = make_node(
      std::move(value), parents,
      [cls = out.cls, boxv = out.box, targets, pos, box_grads, cls_norm,
       box_norm](Node& self) {
        const double g = self.grad[0];
        for (int s = 0; s < 3; ++s) {
          if (!cls[s]->requires_grad) continue;
          Tensor& gx = cls[s]->grad_buffer();
          const Tensor& x = cls[s]->value;
          for (std::size_t j = 0; j < x.size(); ++j) {
            gx[j] += g * cls_norm * (sigmoid(x[j]) - targets[s][j]);
          }
        }
        const double w = g * kBoxLossWeight * box_norm;
        for (std::size_t j = 0; j < pos.size(); ++j) {
          const auto& p = pos[j];
          if (!boxv[p.scale]->requires_grad) continue;
          Tensor& gb = boxv[p.scale]->grad_buffer();
          for (int c = 0; c < 4; ++c) gb.at(p.img, c, p.gy, p.gx) += w * box_grads[j][c];
        }
      });
  return lb;
}

}  // namespace radnas::detector
