#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "radnas/eval/box.hpp"

namespace radnas::eval {

inline constexpr double kDefaultNmsIou = 0.1;

// Greedy class-wise suppression. Detections are visited by descending score
// (ties by input position); one is kept iff its IoU with every kept detection
// of the same class is <= iou_threshold.
std::vector<ScoredDetection> nms(const std::vector<ScoredDetection>& dets,
                                 double iou_threshold = kDefaultNmsIou);

// Per-image inputs for one class. preds[i] and gts[i] belong to image i.
struct ClassSlice {
  std::vector<std::vector<ScoredDetection>> preds;
  std::vector<std::vector<Box>> gts;
};

// All-point interpolated AP. Predictions are matched greedily in score order
// to the unmatched ground truth of highest IoU in the same image, a match
// requiring IoU >= iou_threshold. Returns -1 when the slice has neither
// predictions nor ground truth (excluded from class means), 0 when it has
// predictions but no ground truth.
double average_precision(const ClassSlice& slice, double iou_threshold);

// Thresholds reported per class: 0.30 and 0.50:0.05:0.95.
std::vector<double> report_thresholds();

struct MAPReport {
  int num_classes = 0;
  // ap[class][threshold], threshold keys as in report_thresholds();
  // -1 marks an excluded class.
  std::map<int, std::map<double, double>> ap;
  double map30 = 0;
  double map50 = 0;
  double map70 = 0;
  double map50_95 = 0;

  double map_at(double threshold) const;
};

// preds[i] / gts[i] are all detections / ground truths of image i.
MAPReport map_report(const std::vector<std::vector<ScoredDetection>>& preds,
                     const std::vector<std::vector<GroundTruth>>& gts,
                     int num_classes);

// CSV with header split,class,threshold,AP: one row per (class, threshold),
// then summary rows with class "all" and threshold mAP@30, mAP@50, mAP@70,
// mAP@50-95.
void write_report_csv(std::ostream& os, const std::string& split,
                      const MAPReport& report, bool header = true);
void write_report_csv(const std::filesystem::path& path,
                      const std::string& split, const MAPReport& report);

}  // namespace radnas::eval
