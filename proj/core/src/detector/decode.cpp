#include "radnas/detector/decode.hpp"

#include <algorithm>
#include <cmath>

namespace radnas::detector {

std::vector<std::vector<eval::ScoredDetection>> decode(const DetectionOutput& out,
                                                       const DecodeOptions& options) {
  const int n = out.cls[0]->shape().n;
  std::vector<std::vector<eval::ScoredDetection>> result(n);
  for (int i = 0; i < n; ++i) {
    std::vector<eval::ScoredDetection> cand;
    for (int s = 0; s < 3; ++s) {
      const Tensor& cls = out.cls[s]->value;
      const Tensor& box = out.box[s]->value;
      const Shape cs = cls.shape();
      for (int gy = 0; gy < cs.h; ++gy) {
        for (int gx = 0; gx < cs.w; ++gx) {
          const double cx = gx + 0.5;
          const double cy = gy + 0.5;
          eval::Box b{std::clamp((cx - box.at(i, 0, gy, gx)) / cs.w, 0.0, 1.0),
                      std::clamp((cy - box.at(i, 1, gy, gx)) / cs.h, 0.0, 1.0),
                      std::clamp((cx + box.at(i, 2, gy, gx)) / cs.w, 0.0, 1.0),
                      std::clamp((cy + box.at(i, 3, gy, gx)) / cs.h, 0.0, 1.0)};
          if (!b.valid()) continue;
          for (int c = 0; c < cs.c; ++c) {
            const double score = 1.0 / (1.0 + std::exp(-cls.at(i, c, gy, gx)));
            if (score >= options.score_threshold) cand.push_back({b, c, score});
          }
        }
      }
    }
    // Stable so equal scores keep scan order.
    std::stable_sort(cand.begin(), cand.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    if (static_cast<int>(cand.size()) > options.max_candidates) {
      cand.resize(options.max_candidates);
    }
    auto kept = eval::nms(cand, options.nms_iou);
    if (static_cast<int>(kept.size()) > options.max_detections) {
      kept.resize(options.max_detections);
    }
    result[i] = std::move(kept);
  }
  return result;
}

}  // namespace radnas::detector
