#pragma once

#include <vector>

#include "radnas/io/dataset.hpp"

namespace radnas::eval {

// Corner-form box; coordinates are normalized for detections but iou()
// accepts any units.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool valid() const { return x1 < x2 && y1 < y2; }
  static Box from_annotation(const io::Annotation& a) {
    return {a.cx - a.w / 2, a.cy - a.h / 2, a.cx + a.w / 2, a.cy + a.h / 2};
  }
};

struct ScoredDetection {
  Box box;
  int class_id = 0;
  double score = 0;
};

// Intersection over union; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

struct GroundTruth {
  Box box;
  int class_id = 0;
};

std::vector<GroundTruth> to_ground_truth(const std::vector<io::Annotation>& labels);

}  // namespace radnas::eval
