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
#include <cstdint>
#include <vector>

namespace detkit {

inline constexpr double kPi = 3.14159265358979323846;

// Normalize an angle to (-pi, pi].
inline float normalize_angle(float a) {
  double r = std::fmod(static_cast<double>(a), 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return static_cast<float>(r);
}

struct Box2D {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  float area() const { return std::max(0.0f, x2 - x1) * std::max(0.0f, y2 - y1); }
};

// BEV-centered 3D box: l runs along the heading, w across it.
struct Box3D {
  float cx = 0, cy = 0, cz = 0;
  float w = 0, l = 0, h = 0;
  float yaw = 0;
};

template <typename BoxT>
struct Detection {
  BoxT box;
  float score = 0.0f;
  int class_id = 0;
};

using Detection2D = Detection<Box2D>;
using Detection3D = Detection<Box3D>;

inline double iou_2d(const Box2D& a, const Box2D& b) {
  const float ix1 = std::max(a.x1, b.x1);
  const float iy1 = std::max(a.y1, b.y1);
  const float ix2 = std::min(a.x2, b.x2);
  const float iy2 = std::min(a.y2, b.y2);
  const double inter = static_cast<double>(std::max(0.0f, ix2 - ix1)) *
                       static_cast<double>(std::max(0.0f, iy2 - iy1));
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

namespace detail {

struct Pt {
  double x, y;
};

inline std::vector<Pt> bev_corners(const Box3D& b) {
  const double c = std::cos(static_cast<double>(b.yaw));
  const double s = std::sin(static_cast<double>(b.yaw));
  const double hl = b.l * 0.5, hw = b.w * 0.5;
  // Counter-clockwise in the BEV plane.
  const std::array<Pt, 4> local = {Pt{hl, hw}, Pt{-hl, hw}, Pt{-hl, -hw}, Pt{hl, -hw}};
  std::vector<Pt> out;
  out.reserve(4);
  for (const Pt& p : local) {
    out.push_back({b.cx + c * p.x - s * p.y, b.cy + s * p.x + c * p.y});
  }
  return out;
}

inline double polygon_area(const std::vector<Pt>& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& p = poly[i];
    const Pt& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return std::fabs(a) * 0.5;
}

// Sutherland-Hodgman clip of `subject` against convex CCW polygon `clip`.
inline std::vector<Pt> clip_polygon(std::vector<Pt> subject, const std::vector<Pt>& clip) {
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Pt a = clip[e];
    const Pt b = clip[(e + 1) % m];
    // Inside = left of directed edge a->b for a CCW clip polygon.
    auto side = [&](const Pt& p) {
      return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    std::vector<Pt> out;
    out.reserve(subject.size() + 2);
    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& cur = subject[i];
      const Pt& nxt = subject[(i + 1) % n];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) out.push_back(cur);
      if ((sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

// Exact rotated-rectangle IoU in the BEV plane via polygon clipping and the
// shoelace area.
inline double iou_bev(const Box3D& a, const Box3D& b) {
  const auto ca = detail::bev_corners(a);
  const auto cb = detail::bev_corners(b);
  const double area_a = static_cast<double>(a.w) * a.l;
  const double area_b = static_cast<double>(b.w) * b.l;
  const auto inter_poly = detail::clip_polygon(ca, cb);
  const double inter = inter_poly.size() < 3 ? 0.0 : detail::polygon_area(inter_poly);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::min(1.0, inter / uni);
}

}  // namespace detkit
