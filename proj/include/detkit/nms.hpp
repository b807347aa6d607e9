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
#include <numeric>
#include <stdexcept>
#include <vector>

#include "detkit/boxes.hpp"

namespace detkit {

// Greedy class-wise NMS. Candidates are visited by (score desc, original
// index asc); the index tie-break keeps results reproducible across
// implementations. A kept box suppresses same-class boxes whose IoU exceeds
// the threshold.
template <typename BoxT, typename IouFn>
std::vector<Detection<BoxT>> nms(const std::vector<Detection<BoxT>>& dets,
                                 double iou_threshold, IouFn iou) {
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) throw std::invalid_argument("nms: non-finite score");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  std::vector<Detection<BoxT>> kept;
  std::vector<char> suppressed(dets.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (suppressed[j] || dets[j].class_id != dets[i].class_id) continue;
      if (iou(dets[i].box, dets[j].box) > iou_threshold) suppressed[j] = 1;
    }
  }
  return kept;
}

inline std::vector<Detection2D> nms_2d(const std::vector<Detection2D>& dets,
                                       double iou_threshold) {
  return nms(dets, iou_threshold, [](const Box2D& a, const Box2D& b) { return iou_2d(a, b); });
}

inline std::vector<Detection3D> nms_bev(const std::vector<Detection3D>& dets,
                                        double iou_threshold) {
  return nms(dets, iou_threshold, [](const Box3D& a, const Box3D& b) { return iou_bev(a, b); });
}

}  // namespace detkit
