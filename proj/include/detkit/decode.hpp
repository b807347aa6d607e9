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
#include <stdexcept>
#include <vector>

#include "detkit/boxes.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

// Decoded boxes keep their anchor row index so sparse per-anchor scores stay
// aligned; rows with non-finite deltas are dropped and counted.
struct Decoded2D {
  std::vector<Box2D> boxes;
  std::vector<std::int64_t> anchor_indices;
  std::int64_t dropped = 0;
};

struct Decoded3D {
  std::vector<Box3D> boxes;
  std::vector<std::int64_t> anchor_indices;
  std::int64_t dropped = 0;
};

namespace detail {

inline bool all_finite(const float* p, int n) {
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

}  // namespace detail

// Standard anchor-delta decode: centers move by delta * anchor extent, sizes
// scale by exp(delta); corners are clipped to the image.
inline Box2D decode_2d_one(const float* anchor, const float* delta, int img_h, int img_w) {
  const float ax = 0.5f * (anchor[0] + anchor[2]);
  const float ay = 0.5f * (anchor[1] + anchor[3]);
  const float aw = anchor[2] - anchor[0];
  const float ah = anchor[3] - anchor[1];
  const float cx = ax + delta[0] * aw;
  const float cy = ay + delta[1] * ah;
  const float w = aw * std::exp(delta[2]);
  const float h = ah * std::exp(delta[3]);
  Box2D b;
  b.x1 = std::clamp(cx - 0.5f * w, 0.0f, static_cast<float>(img_w));
  b.y1 = std::clamp(cy - 0.5f * h, 0.0f, static_cast<float>(img_h));
  b.x2 = std::clamp(cx + 0.5f * w, 0.0f, static_cast<float>(img_w));
  b.y2 = std::clamp(cy + 0.5f * h, 0.0f, static_cast<float>(img_h));
  return b;
}

inline Decoded2D decode_2d(const Tensor& anchors, const Tensor& deltas, int img_h, int img_w) {
  if (anchors.shape() != deltas.shape() || anchors.rank() != 2 || anchors.shape()[1] != 4) {
    throw std::invalid_argument("decode_2d: anchors and deltas must both be (A,4)");
  }
  const std::int64_t a_count = anchors.shape()[0];
  Decoded2D out;
  out.boxes.reserve(a_count);
  out.anchor_indices.reserve(a_count);
  for (std::int64_t a = 0; a < a_count; ++a) {
    const float* d = deltas.fdata().data() + 4 * a;
    if (!detail::all_finite(d, 4)) {
      ++out.dropped;
      continue;
    }
    out.boxes.push_back(decode_2d_one(anchors.fdata().data() + 4 * a, d, img_h, img_w));
    out.anchor_indices.push_back(a);
  }
  return out;
}

// Inverse of decode_2d_one (no clipping); test and fixture helper.
inline std::array<float, 4> encode_2d(const float* anchor, const Box2D& box) {
  const float ax = 0.5f * (anchor[0] + anchor[2]);
  const float ay = 0.5f * (anchor[1] + anchor[3]);
  const float aw = anchor[2] - anchor[0];
  const float ah = anchor[3] - anchor[1];
  const float cx = 0.5f * (box.x1 + box.x2);
  const float cy = 0.5f * (box.y1 + box.y2);
  const float w = box.x2 - box.x1;
  const float h = box.y2 - box.y1;
  return {(cx - ax) / aw, (cy - ay) / ah, std::log(w / aw), std::log(h / ah)};
}

// Residual 3D decode with diagonal normalization; the direction classifier
// flips the yaw by pi when its argmax picks the opposite bin.
inline Box3D decode_3d_one(const float* anchor, const float* delta, const float* dir_logit) {
  const float aw = anchor[3], al = anchor[4], ah = anchor[5];
  const float diag = std::sqrt(aw * aw + al * al);
  Box3D b;
  b.cx = anchor[0] + delta[0] * diag;
  b.cy = anchor[1] + delta[1] * diag;
  b.cz = anchor[2] + delta[2] * ah;
  b.w = aw * std::exp(delta[3]);
  b.l = al * std::exp(delta[4]);
  b.h = ah * std::exp(delta[5]);
  float yaw = anchor[6] + delta[6];
  if (dir_logit[1] > dir_logit[0]) yaw += static_cast<float>(kPi);
  b.yaw = normalize_angle(yaw);
  return b;
}

inline Decoded3D decode_3d(const Tensor& anchors, const Tensor& deltas, const Tensor& dir_logits) {
  if (anchors.rank() != 2 || anchors.shape()[1] != 7 || anchors.shape() != deltas.shape()) {
    throw std::invalid_argument("decode_3d: anchors and deltas must both be (A,7)");
  }
  if (dir_logits.rank() != 2 || dir_logits.shape()[0] != anchors.shape()[0] ||
      dir_logits.shape()[1] != 2) {
    throw std::invalid_argument("decode_3d: dir logits must be (A,2)");
  }
  const std::int64_t a_count = anchors.shape()[0];
  Decoded3D out;
  out.boxes.reserve(a_count);
  out.anchor_indices.reserve(a_count);
  for (std::int64_t a = 0; a < a_count; ++a) {
    const float* d = deltas.fdata().data() + 7 * a;
    const float* dl = dir_logits.fdata().data() + 2 * a;
    if (!detail::all_finite(d, 7) || !detail::all_finite(dl, 2)) {
      ++out.dropped;
      continue;
    }
    out.boxes.push_back(decode_3d_one(anchors.fdata().data() + 7 * a, d, dl));
    out.anchor_indices.push_back(a);
  }
  return out;
}

struct Encoded3D {
  std::array<float, 7> deltas;
  int dir_bin = 0;  // 1 means the decode flips yaw by pi
};

inline Encoded3D encode_3d(const float* anchor, const Box3D& box) {
  const float aw = anchor[3], al = anchor[4], ah = anchor[5];
  const float diag = std::sqrt(aw * aw + al * al);
  Encoded3D e;
  e.deltas[0] = (box.cx - anchor[0]) / diag;
  e.deltas[1] = (box.cy - anchor[1]) / diag;
  e.deltas[2] = (box.cz - anchor[2]) / ah;
  e.deltas[3] = std::log(box.w / aw);
  e.deltas[4] = std::log(box.l / al);
  e.deltas[5] = std::log(box.h / ah);
  // Residual within (-pi/2, pi/2]; anything further flips the direction bin.
  float dyaw = normalize_angle(box.yaw - anchor[6]);
  int bin = 0;
  if (dyaw > static_cast<float>(kPi / 2.0) || dyaw <= -static_cast<float>(kPi / 2.0)) {
    bin = 1;
    dyaw = normalize_angle(dyaw - static_cast<float>(kPi));
  }
  e.deltas[6] = dyaw;
  e.dir_bin = bin;
  return e;
}

struct ScoredAnchor {
  std::int64_t anchor = 0;
  int class_id = 0;
  float score = 0.0f;
};

// Sigmoid-then-threshold filter over raw class logits. This is explicitly a
// pipeline step: a traced graph would constant-fold the data-dependent
// selection away.
inline std::vector<ScoredAnchor> score_filter(const Tensor& logits, float threshold) {
  if (logits.rank() != 2) throw std::invalid_argument("score_filter: logits must be (A,K)");
  if (!(threshold >= 0.0f && threshold <= 1.0f)) {
    throw std::invalid_argument("score_filter: threshold must be in [0,1]");
  }
  const std::int64_t a_count = logits.shape()[0];
  const std::int64_t k_count = logits.shape()[1];
  std::vector<ScoredAnchor> out;
  for (std::int64_t a = 0; a < a_count; ++a) {
    for (std::int64_t k = 0; k < k_count; ++k) {
      const float logit = logits.fdata()[a * k_count + k];
      const float score = 1.0f / (1.0f + std::exp(-logit));
      if (score > threshold) {
        out.push_back({a, static_cast<int>(k), score});
      }
    }
  }
  return out;
}

}  // namespace detkit
