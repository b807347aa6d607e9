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

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/boxes.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

// Image-plane anchors on a stride grid. Enumeration order is fixed so the
// tensor can live in the graph as a constant: level, then cell (row-major),
// then ratio, then scale.
struct AnchorConfig2D {
  std::vector<int> strides = {8, 16};
  std::vector<float> scales = {1.0f};
  std::vector<float> ratios = {0.5f, 1.0f, 2.0f};  // height / width
  float base_size_factor = 4.0f;                   // base edge = factor * stride * scale

  int anchors_per_cell() const {
    return static_cast<int>(scales.size() * ratios.size());
  }
};

inline Tensor generate_anchors_2d(int height, int width, const AnchorConfig2D& cfg) {
  if (cfg.strides.empty() || cfg.scales.empty() || cfg.ratios.empty()) {
    throw std::invalid_argument("anchors2d: empty config");
  }
  std::vector<float> rows;
  for (int stride : cfg.strides) {
    if (stride <= 0 || height % stride != 0 || width % stride != 0) {
      throw std::invalid_argument("anchors2d: stride " + std::to_string(stride) +
                                  " does not divide " + std::to_string(height) + "x" +
                                  std::to_string(width));
    }
    const int gh = height / stride;
    const int gw = width / stride;
    for (int i = 0; i < gh; ++i) {
      for (int j = 0; j < gw; ++j) {
        const float cx = (static_cast<float>(j) + 0.5f) * static_cast<float>(stride);
        const float cy = (static_cast<float>(i) + 0.5f) * static_cast<float>(stride);
        for (float ratio : cfg.ratios) {
          for (float scale : cfg.scales) {
            const float base = cfg.base_size_factor * static_cast<float>(stride) * scale;
            const float w = base / std::sqrt(ratio);
            const float h = base * std::sqrt(ratio);
            rows.push_back(cx - 0.5f * w);
            rows.push_back(cy - 0.5f * h);
            rows.push_back(cx + 0.5f * w);
            rows.push_back(cy + 0.5f * h);
          }
        }
      }
    }
  }
  const std::int64_t count = static_cast<std::int64_t>(rows.size()) / 4;
  return Tensor::f32({count, 4}, std::move(rows));
}

// One BEV anchor set for a single class size; rotation is the innermost
// enumeration axis, cells run row-major over the grid.
struct AnchorConfig3D {
  float x_min = 0.0f, x_max = 69.12f;
  float y_min = -39.68f, y_max = 39.68f;
  int grid_h = 0;  // rows (y)
  int grid_w = 0;  // cols (x)
  std::array<float, 3> size = {1.6f, 3.9f, 1.56f};  // w, l, h
  float z_center = -1.0f;
  std::vector<float> rotations = {0.0f, static_cast<float>(kPi / 2.0)};
};

inline Tensor generate_anchors_3d(const AnchorConfig3D& cfg) {
  if (cfg.grid_h <= 0 || cfg.grid_w <= 0 || cfg.rotations.empty()) {
    throw std::invalid_argument("anchors3d: empty config");
  }
  if (!(cfg.x_max > cfg.x_min) || !(cfg.y_max > cfg.y_min)) {
    throw std::invalid_argument("anchors3d: degenerate ranges");
  }
  const float dx = (cfg.x_max - cfg.x_min) / static_cast<float>(cfg.grid_w);
  const float dy = (cfg.y_max - cfg.y_min) / static_cast<float>(cfg.grid_h);
  std::vector<float> rows;
  rows.reserve(static_cast<std::size_t>(cfg.grid_h) * cfg.grid_w * cfg.rotations.size() * 7);
  for (int i = 0; i < cfg.grid_h; ++i) {
    for (int j = 0; j < cfg.grid_w; ++j) {
      const float cx = cfg.x_min + (static_cast<float>(j) + 0.5f) * dx;
      const float cy = cfg.y_min + (static_cast<float>(i) + 0.5f) * dy;
      for (float rot : cfg.rotations) {
        rows.push_back(cx);
        rows.push_back(cy);
        rows.push_back(cfg.z_center);
        rows.push_back(cfg.size[0]);
        rows.push_back(cfg.size[1]);
        rows.push_back(cfg.size[2]);
        rows.push_back(rot);
      }
    }
  }
  const std::int64_t count = static_cast<std::int64_t>(rows.size()) / 7;
  return Tensor::f32({count, 7}, std::move(rows));
}

}  // namespace detkit
