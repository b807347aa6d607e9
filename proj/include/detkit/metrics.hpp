// Copyright 2026 The detkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/boxes.hpp"
#include "detkit/detection_io.hpp"

namespace detkit {

template <typename BoxT>
struct FrameDet {
  int frame = 0;
  int class_id = 0;
  float score = 0.0f;
  BoxT box;
};

template <typename BoxT>
struct FrameGt {
  int frame = 0;
  int class_id = 0;
  BoxT box;
};

// Greedy TP/FP assignment. Detections must arrive sorted by score descending
// (ties by original index); each one claims the highest-IoU unmatched ground
// truth of its frame and class if that IoU reaches the threshold, and every
// ground truth matches at most once.
template <typename BoxT, typename IouFn>
std::vector<bool> match_detections(const std::vector<FrameDet<BoxT>>& dets_sorted,
                                   const std::vector<FrameGt<BoxT>>& gts,
                                   double iou_threshold, IouFn iou) {
  for (std::size_t i = 1; i < dets_sorted.size(); ++i) {
    if (dets_sorted[i].score > dets_sorted[i - 1].score) {
      throw std::invalid_argument("match_detections: detections must be sorted by score");
    }
  }
  std::vector<bool> tp(dets_sorted.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t d = 0; d < dets_sorted.size(); ++d) {
    const auto& det = dets_sorted[d];
    double best_iou = 0.0;
    std::ptrdiff_t best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].frame != det.frame || gts[g].class_id != det.class_id) continue;
      const double v = iou(det.box, gts[g].box);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_g = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best_g >= 0) {
      tp[d] = true;
      used[static_cast<std::size_t>(best_g)] = true;
    }
  }
  return tp;
}

enum class ApInterp { kAllPoint, k40Point };

// Average precision over the TP/FP sequence of score-sorted detections.
// All-point interpolation integrates the precision envelope exactly; the
// 40-point mode samples it KITTI-style at recalls 1/40 .. 40/40.
inline double average_precision(const std::vector<bool>& tp_flags, std::int64_t num_gt,
                                ApInterp interp = ApInterp::kAllPoint) {
  if (num_gt <= 0) {
    throw std::invalid_argument("average_precision: num_gt must be positive");
  }
  const std::size_t n = tp_flags.size();
  std::vector<double> precision(n), recall(n);
  std::int64_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  // Monotone envelope from the right.
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  if (interp == ApInterp::kAllPoint) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (recall[i] > prev_recall) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
      }
    }
    return ap;
  }
  double ap = 0.0;
  for (int k = 1; k <= 40; ++k) {
    const double r = static_cast<double>(k) / 40.0;
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (recall[i] >= r) {
        p = precision[i];
        break;
      }
    }
    ap += p;
  }
  return ap / 40.0;
}

struct MapResult {
  double map = 0.0;
  double weighted_map = 0.0;
};

// Unweighted mean and the ground-truth-count-weighted mean of per-class APs.
inline MapResult map_and_weighted_map(const std::vector<double>& aps,
                                      const std::vector<std::int64_t>& gt_counts) {
  if (aps.size() != gt_counts.size() || aps.empty()) {
    throw std::invalid_argument("map: need one gt count per class AP");
  }
  MapResult r;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    if (gt_counts[i] <= 0) {
      throw std::invalid_argument("map: classes without ground truth must be excluded");
    }
    r.map += aps[i];
    r.weighted_map += aps[i] * static_cast<double>(gt_counts[i]);
    weight_sum += static_cast<double>(gt_counts[i]);
  }
  r.map /= static_cast<double>(aps.size());
  r.weighted_map /= weight_sum;
  return r;
}

struct ClassEval {
  std::string cls;
  double ap = 0.0;
  std::int64_t num_gt = 0;
  std::int64_t num_det = 0;
  double iou_threshold = 0.0;
};

struct EvalReport {
  std::vector<ClassEval> classes;  // classes with num_gt > 0, name order
  double map = 0.0;
  double weighted_map = 0.0;
  std::vector<std::string> warnings;
};

// Record-level evaluation shared by the CLI and tests. Boxes must be
// homogeneous (all 2D or all 3D); per-class IoU thresholds fall back to
// `default_iou`.
inline EvalReport evaluate_detections(const std::vector<DetectionRecord>& dets,
                                      const std::vector<DetectionRecord>& gts,
                                      const std::map<std::string, double>& class_iou,
                                      double default_iou, ApInterp interp = ApInterp::kAllPoint) {
  std::set<std::string> class_names;
  for (const auto& g : gts) class_names.insert(g.cls);
  for (const auto& d : dets) class_names.insert(d.cls);

  EvalReport report;
  std::vector<double> aps;
  std::vector<std::int64_t> counts;
  for (const std::string& cls : class_names) {
    ClassEval ce;
    ce.cls = cls;
    auto it = class_iou.find(cls);
    ce.iou_threshold = it != class_iou.end() ? it->second : default_iou;

    std::vector<std::size_t> det_idx;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].cls == cls) det_idx.push_back(i);
    }
    std::sort(det_idx.begin(), det_idx.end(), [&](std::size_t a, std::size_t b) {
      if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
      return a < b;
    });
    ce.num_det = static_cast<std::int64_t>(det_idx.size());

    std::vector<const DetectionRecord*> cls_gts;
    for (const auto& g : gts) {
      if (g.cls == cls) cls_gts.push_back(&g);
    }
    ce.num_gt = static_cast<std::int64_t>(cls_gts.size());

    if (ce.num_gt == 0) {
      report.warnings.push_back("class '" + cls + "' has detections but no ground truth; AP 0");
      ce.ap = 0.0;
      report.classes.push_back(ce);
      continue;
    }

    const bool use_3d = cls_gts[0]->is_3d();
    std::vector<bool> flags;
    if (use_3d) {
      std::vector<FrameDet<Box3D>> fd;
      for (std::size_t i : det_idx) {
        fd.push_back({dets[i].frame, 0, static_cast<float>(dets[i].score), dets[i].box3d()});
      }
      std::vector<FrameGt<Box3D>> fg;
      for (const auto* g : cls_gts) fg.push_back({g->frame, 0, g->box3d()});
      flags = match_detections(fd, fg, ce.iou_threshold,
                               [](const Box3D& a, const Box3D& b) { return iou_bev(a, b); });
    } else {
      std::vector<FrameDet<Box2D>> fd;
      for (std::size_t i : det_idx) {
        fd.push_back({dets[i].frame, 0, static_cast<float>(dets[i].score), dets[i].box2d()});
      }
      std::vector<FrameGt<Box2D>> fg;
      for (const auto* g : cls_gts) fg.push_back({g->frame, 0, g->box2d()});
      flags = match_detections(fd, fg, ce.iou_threshold,
                               [](const Box2D& a, const Box2D& b) { return iou_2d(a, b); });
    }
    ce.ap = average_precision(flags, ce.num_gt, interp);
    report.classes.push_back(ce);
    aps.push_back(ce.ap);
    counts.push_back(ce.num_gt);
  }

  if (!aps.empty()) {
    const MapResult m = map_and_weighted_map(aps, counts);
    report.map = m.map;
    report.weighted_map = m.weighted_map;
  }
  return report;
}

}  // namespace detkit
