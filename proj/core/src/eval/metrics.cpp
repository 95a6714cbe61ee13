#include "radnas/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace radnas::eval {

double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<GroundTruth> to_ground_truth(const std::vector<io::Annotation>& labels) {
  std::vector<GroundTruth> out;
  out.reserve(labels.size());
  for (const auto& a : labels) out.push_back({Box::from_annotation(a), a.class_id});
  return out;
}

std::vector<ScoredDetection> nms(const std::vector<ScoredDetection>& dets,
                                 double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<ScoredDetection> kept;
  for (std::size_t idx : order) {
    const auto& d = dets[idx];
    bool keep = true;
    for (const auto& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(d);
  }
  return kept;
}

double average_precision(const ClassSlice& slice, double iou_threshold) {
  if (slice.preds.size() != slice.gts.size()) {
    throw std::invalid_argument("average_precision: image count mismatch");
  }
  struct Ranked {
    double score;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  std::size_t total_gt = 0;
  for (std::size_t i = 0; i < slice.preds.size(); ++i) {
    total_gt += slice.gts[i].size();
    for (std::size_t j = 0; j < slice.preds[i].size(); ++j) {
      ranked.push_back({slice.preds[i][j].score, i, j});
    }
  }
  if (ranked.empty() && total_gt == 0) return -1.0;
  if (total_gt == 0 || ranked.empty()) return 0.0;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> matched(slice.gts.size());
  for (std::size_t i = 0; i < slice.gts.size(); ++i) {
    matched[i].assign(slice.gts[i].size(), false);
  }
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const Ranked& r = ranked[k];
    const Box& pb = slice.preds[r.image][r.index].box;
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < slice.gts[r.image].size(); ++g) {
      if (matched[r.image][g]) continue;
      const double v = iou(pb, slice.gts[r.image][g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best >= iou_threshold) {
      matched[r.image][best_gt] = true;
      ++tp;
    }
    recall.push_back(static_cast<double>(tp) / total_gt);
    precision.push_back(static_cast<double>(tp) / (k + 1));
  }
  // Precision envelope from the right, then integrate over recall steps.
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return std::clamp(ap, 0.0, 1.0);
}

std::vector<double> report_thresholds() {
  std::vector<double> t{0.30};
  for (int i = 0; i < 10; ++i) t.push_back(std::round((0.50 + 0.05 * i) * 100) / 100);
  return t;
}

double MAPReport::map_at(double threshold) const {
  double acc = 0.0;
  int counted = 0;
  for (const auto& [cls, by_threshold] : ap) {
    auto it = by_threshold.find(threshold);
    if (it == by_threshold.end()) {
      throw std::invalid_argument("threshold not in report");
    }
    if (it->second < 0) continue;
    acc += it->second;
    ++counted;
  }
  return counted ? acc / counted : 0.0;
}

MAPReport map_report(const std::vector<std::vector<ScoredDetection>>& preds,
                     const std::vector<std::vector<GroundTruth>>& gts,
                     int num_classes) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("map_report: image count mismatch");
  }
  MAPReport report;
  report.num_classes = num_classes;
  const auto thresholds = report_thresholds();
  for (int cls = 0; cls < num_classes; ++cls) {
    ClassSlice slice;
    slice.preds.resize(preds.size());
    slice.gts.resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (const auto& d : preds[i]) {
        if (d.class_id == cls) slice.preds[i].push_back(d);
      }
      for (const auto& g : gts[i]) {
        if (g.class_id == cls) slice.gts[i].push_back(g.box);
      }
    }
    for (double t : thresholds) report.ap[cls][t] = average_precision(slice, t);
  }
  report.map30 = report.map_at(0.30);
  report.map50 = report.map_at(0.50);
  report.map70 = report.map_at(0.70);
  double acc = 0.0;
  for (std::size_t i = 1; i < thresholds.size(); ++i) acc += report.map_at(thresholds[i]);
  report.map50_95 = acc / static_cast<double>(thresholds.size() - 1);
  return report;
}

void write_report_csv(std::ostream& os, const std::string& split,
                      const MAPReport& report, bool header) {
  char buf[128];
  if (header) os << "split,class,threshold,AP\n";
  for (const auto& [cls, by_threshold] : report.ap) {
    for (const auto& [t, ap] : by_threshold) {
      if (ap < 0) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.2f,NA\n", split.c_str(), cls, t);
      } else {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.2f,%.6f\n", split.c_str(), cls, t, ap);
      }
      os << buf;
    }
  }
  const std::pair<const char*, double> summary[] = {{"mAP@30", report.map30},
                                                    {"mAP@50", report.map50},
                                                    {"mAP@70", report.map70},
                                                    {"mAP@50-95", report.map50_95}};
  for (const auto& [name, v] : summary) {
    std::snprintf(buf, sizeof(buf), "%s,all,%s,%.6f\n", split.c_str(), name, v);
    os << buf;
  }
}

void write_report_csv(const std::filesystem::path& path,
                      const std::string& split, const MAPReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_report_csv(os, split, report);
}

}  // namespace radnas::eval
