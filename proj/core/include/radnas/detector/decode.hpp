#pragma once

#include <vector>

#include "radnas/detector/model.hpp"
#include "radnas/eval/metrics.hpp"

namespace radnas::detector {

struct DecodeOptions {
  double score_threshold = 0.01;
  double nms_iou = eval::kDefaultNmsIou;
  int max_candidates = 1000;  // per image, before suppression
  int max_detections = 100;   // per image, after suppression
};

// Per-image detections: every (cell, class) whose sigmoid score reaches the
// threshold becomes a box around the cell center, clipped to [0,1]^2, then
// class-wise NMS.
std::vector<std::vector<eval::ScoredDetection>> decode(const DetectionOutput& out,
                                                       const DecodeOptions& options = {});

}  // namespace radnas::detector
