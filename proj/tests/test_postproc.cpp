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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "detkit/anchors.hpp"
#include "detkit/boxes.hpp"
#include "detkit/decode.hpp"
#include "detkit/nms.hpp"
#include "test_util.hpp"

using namespace detkit;

namespace {

// O(n^2) reference NMS: keep-highest-then-suppress, spelled out directly.
std::vector<Detection2D> nms_reference(const std::vector<Detection2D>& dets, double thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Detection2D> kept;
  std::vector<bool> alive(dets.size(), true);
  for (std::size_t i : order) {
    if (!alive[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j : order) {
      if (j == i || !alive[j]) continue;
      if (dets[j].class_id == dets[i].class_id && iou_2d(dets[i].box, dets[j].box) > thr) {
        alive[j] = false;
      }
    }
    alive[i] = false;
  }
  return kept;
}

bool point_in_box3d_bev(const Box3D& b, double x, double y) {
  const double c = std::cos(-static_cast<double>(b.yaw));
  const double s = std::sin(-static_cast<double>(b.yaw));
  const double dx = x - b.cx;
  const double dy = y - b.cy;
  const double lx = c * dx - s * dy;
  const double ly = s * dx + c * dy;
  return std::fabs(lx) <= b.l * 0.5 && std::fabs(ly) <= b.w * 0.5;
}

// Monte-Carlo IoU estimate over the pair's bounding box. The ratio estimator
// shares samples between intersection and union counts.
double iou_bev_monte_carlo(const Box3D& a, const Box3D& b, int samples, std::uint64_t seed) {
  double x_lo = 1e30, x_hi = -1e30, y_lo = 1e30, y_hi = -1e30;
  for (const Box3D* box : {&a, &b}) {
    const double r = 0.5 * std::hypot(box->w, box->l);
    x_lo = std::min(x_lo, box->cx - r);
    x_hi = std::max(x_hi, box->cx + r);
    y_lo = std::min(y_lo, box->cy - r);
    y_hi = std::max(y_hi, box->cy + r);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(x_lo, x_hi), uy(y_lo, y_hi);
  std::int64_t in_union = 0, in_inter = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = ux(rng), y = uy(rng);
    const bool ia = point_in_box3d_bev(a, x, y);
    const bool ib = point_in_box3d_bev(b, x, y);
    if (ia || ib) ++in_union;
    if (ia && ib) ++in_inter;
  }
  if (in_union == 0) return 0.0;
  return static_cast<double>(in_inter) / static_cast<double>(in_union);
}

Box3D random_box3d(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> center(-3.0f, 3.0f);
  std::uniform_real_distribution<float> extent(0.5f, 4.0f);
  std::uniform_real_distribution<float> angle(-static_cast<float>(kPi),
                                              static_cast<float>(kPi));
  Box3D b;
  b.cx = center(rng);
  b.cy = center(rng);
  b.cz = 0.0f;
  b.w = extent(rng);
  b.l = extent(rng);
  b.h = 1.5f;
  b.yaw = normalize_angle(angle(rng));
  return b;
}

}  // namespace

TEST_CASE("anchor enumeration for a single level") {
  AnchorConfig2D cfg;
  cfg.strides = {32};
  cfg.scales = {1.0f};
  cfg.ratios = {1.0f};
  const Tensor a = generate_anchors_2d(64, 64, cfg);
  REQUIRE(a.shape() == std::vector<std::int64_t>{4, 4});
  // Centers at cell centers, row-major: (16,16), (48,16), (16,48), (48,48).
  const float base = cfg.base_size_factor * 32.0f;
  const float expected_centers[4][2] = {{16, 16}, {48, 16}, {16, 48}, {48, 48}};
  for (int i = 0; i < 4; ++i) {
    const float* row = a.fdata().data() + 4 * i;
    CHECK(0.5f * (row[0] + row[2]) == expected_centers[i][0]);
    CHECK(0.5f * (row[1] + row[3]) == expected_centers[i][1]);
    CHECK(row[2] - row[0] == base);
  }
}

TEST_CASE("anchor count is proportional to pixel count") {
  AnchorConfig2D cfg;  // strides 8 and 16, 3 ratios
  const auto count = [&](int h, int w) {
    return generate_anchors_2d(h, w, cfg).shape()[0];
  };
  const std::int64_t low = count(416, 736);
  const std::int64_t mid = count(576, 1024);
  const std::int64_t high = count(832, 1472);
  const double pixels_low = 416.0 * 736.0;
  const double pixels_mid = 576.0 * 1024.0;
  const double pixels_high = 832.0 * 1472.0;
  CHECK(static_cast<double>(mid) / low == Catch::Approx(pixels_mid / pixels_low));
  CHECK(static_cast<double>(high) / low == Catch::Approx(pixels_high / pixels_low));
}

TEST_CASE("anchors match a brute-force enumeration oracle") {
  AnchorConfig2D cfg;
  cfg.strides = {8, 16};
  cfg.scales = {1.0f, 1.2599f};
  cfg.ratios = {0.5f, 1.0f, 2.0f};
  const Tensor got = generate_anchors_2d(32, 64, cfg);

  std::vector<float> want;
  for (int stride : cfg.strides) {
    for (int i = 0; i < 32 / stride; ++i) {
      for (int j = 0; j < 64 / stride; ++j) {
        for (float ratio : cfg.ratios) {
          for (float scale : cfg.scales) {
            const float cx = (j + 0.5f) * stride;
            const float cy = (i + 0.5f) * stride;
            const float base = 4.0f * stride * scale;
            const float w = base / std::sqrt(ratio);
            const float h = base * std::sqrt(ratio);
            want.insert(want.end(), {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
          }
        }
      }
    }
  }
  REQUIRE(got.numel() == static_cast<std::int64_t>(want.size()));
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(got.fdata()[i] == want[i]);
  }
}

TEST_CASE("anchor generation rejects non-dividing strides") {
  AnchorConfig2D cfg;
  cfg.strides = {32};
  CHECK_THROWS_WITH(generate_anchors_2d(60, 64, cfg),
                    Catch::Matchers::ContainsSubstring("divide"));
}

TEST_CASE("3d anchors enumerate cells then rotations") {
  AnchorConfig3D cfg;
  cfg.x_min = 0;
  cfg.x_max = 4;
  cfg.y_min = 0;
  cfg.y_max = 2;
  cfg.grid_h = 2;
  cfg.grid_w = 4;
  cfg.size = {1.6f, 3.9f, 1.56f};
  cfg.z_center = -1.0f;
  const Tensor a = generate_anchors_3d(cfg);
  REQUIRE(a.shape() == std::vector<std::int64_t>{16, 7});
  // First cell (row 0, col 0): center (0.5, 0.5), rotations 0 then pi/2.
  CHECK(a.fdata()[0] == 0.5f);
  CHECK(a.fdata()[1] == 0.5f);
  CHECK(a.fdata()[6] == 0.0f);
  CHECK(a.fdata()[7 + 6] == Catch::Approx(kPi / 2));
  // Translation covariance: shifting the grid shifts every anchor center.
  AnchorConfig3D shifted = cfg;
  shifted.x_min += 10.0f;
  shifted.x_max += 10.0f;
  const Tensor b = generate_anchors_3d(shifted);
  for (std::int64_t r = 0; r < a.shape()[0]; ++r) {
    CHECK(b.fdata()[r * 7 + 0] == a.fdata()[r * 7 + 0] + 10.0f);
    CHECK(b.fdata()[r * 7 + 1] == a.fdata()[r * 7 + 1]);
  }
}

TEST_CASE("decode_2d identity and analytic deltas") {
  const Tensor anchors = Tensor::f32({1, 4}, {10, 20, 50, 60});
  const Tensor zero = Tensor::zeros_f32({1, 4});
  const auto id = decode_2d(anchors, zero, 100, 100);
  REQUIRE(id.boxes.size() == 1);
  CHECK(id.boxes[0].x1 == 10.0f);
  CHECK(id.boxes[0].y1 == 20.0f);
  CHECK(id.boxes[0].x2 == 50.0f);
  CHECK(id.boxes[0].y2 == 60.0f);

  const Tensor far_anchors = Tensor::f32({1, 4}, {100, 100, 140, 140});
  const Tensor dbl = Tensor::f32({1, 4}, {0, 0, std::log(2.0f), 0});
  const auto doubled = decode_2d(far_anchors, dbl, 400, 400);
  CHECK(doubled.boxes[0].x2 - doubled.boxes[0].x1 == Catch::Approx(80.0f));
  CHECK(doubled.boxes[0].y2 - doubled.boxes[0].y1 == Catch::Approx(40.0f));
}

TEST_CASE("decode_2d drops non-finite rows with a count") {
  const Tensor anchors = Tensor::f32({2, 4}, {10, 10, 20, 20, 30, 30, 40, 40});
  const Tensor deltas =
      Tensor::f32({2, 4}, {0, 0, 0, 0, std::numeric_limits<float>::quiet_NaN(), 0, 0, 0});
  const auto out = decode_2d(anchors, deltas, 100, 100);
  CHECK(out.boxes.size() == 1);
  CHECK(out.dropped == 1);
  CHECK(out.anchor_indices == std::vector<std::int64_t>{0});
}

TEST_CASE("encode/decode 2d roundtrip") {
  std::mt19937_64 rng(0xDEC0);
  std::uniform_real_distribution<float> pos(100.0f, 400.0f);
  std::uniform_real_distribution<float> size(10.0f, 120.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const float acx = pos(rng), acy = pos(rng), aw = size(rng), ah = size(rng);
    const float anchor[4] = {acx - aw / 2, acy - ah / 2, acx + aw / 2, acy + ah / 2};
    Box2D gt;
    const float gcx = pos(rng), gcy = pos(rng), gw = size(rng), gh = size(rng);
    gt.x1 = gcx - gw / 2;
    gt.y1 = gcy - gh / 2;
    gt.x2 = gcx + gw / 2;
    gt.y2 = gcy + gh / 2;
    const auto deltas = encode_2d(anchor, gt);
    const Box2D back = decode_2d_one(anchor, deltas.data(), 1000, 1000);
    CHECK(std::fabs(back.x1 - gt.x1) < 1e-3f);
    CHECK(std::fabs(back.y1 - gt.y1) < 1e-3f);
    CHECK(std::fabs(back.x2 - gt.x2) < 1e-3f);
    CHECK(std::fabs(back.y2 - gt.y2) < 1e-3f);
  }
}

TEST_CASE("decode_3d identity and direction flip") {
  const Tensor anchors = Tensor::f32({1, 7}, {5, 5, -1, 1.6f, 3.9f, 1.56f, 0});
  const Tensor zero = Tensor::zeros_f32({1, 7});
  const Tensor keep_dir = Tensor::f32({1, 2}, {1.0f, -1.0f});
  const auto id = decode_3d(anchors, zero, keep_dir);
  REQUIRE(id.boxes.size() == 1);
  CHECK(id.boxes[0].cx == 5.0f);
  CHECK(id.boxes[0].w == 1.6f);
  CHECK(id.boxes[0].yaw == 0.0f);

  const Tensor flip_dir = Tensor::f32({1, 2}, {-1.0f, 1.0f});
  const auto flipped = decode_3d(anchors, zero, flip_dir);
  CHECK(std::fabs(normalize_angle(flipped.boxes[0].yaw - id.boxes[0].yaw)) ==
        Catch::Approx(kPi));
  CHECK(flipped.boxes[0].cx == id.boxes[0].cx);
  CHECK(flipped.boxes[0].l == id.boxes[0].l);
}

TEST_CASE("encode/decode 3d roundtrip including yaw wrap") {
  std::mt19937_64 rng(0x3DDE);
  std::uniform_real_distribution<float> pos(-20.0f, 20.0f);
  std::uniform_real_distribution<float> ext(0.5f, 5.0f);
  std::uniform_real_distribution<float> ang(-static_cast<float>(kPi),
                                            static_cast<float>(kPi));
  for (int trial = 0; trial < 200; ++trial) {
    float anchor[7] = {pos(rng), pos(rng), -1.0f, ext(rng), ext(rng), ext(rng),
                       (trial % 2) ? 0.0f : static_cast<float>(kPi / 2)};
    Box3D gt;
    gt.cx = pos(rng);
    gt.cy = pos(rng);
    gt.cz = -1.0f + 0.1f * pos(rng);
    gt.w = ext(rng);
    gt.l = ext(rng);
    gt.h = ext(rng);
    gt.yaw = normalize_angle(ang(rng));
    const Encoded3D enc = encode_3d(anchor, gt);
    float dir[2] = {enc.dir_bin == 0 ? 1.0f : 0.0f, enc.dir_bin == 1 ? 1.0f : 0.0f};
    const Box3D back = decode_3d_one(anchor, enc.deltas.data(), dir);
    CHECK(std::fabs(back.cx - gt.cx) < 1e-4f);
    CHECK(std::fabs(back.cy - gt.cy) < 1e-4f);
    CHECK(std::fabs(back.cz - gt.cz) < 1e-4f);
    CHECK(std::fabs(back.w - gt.w) < 1e-4f);
    CHECK(std::fabs(back.l - gt.l) < 1e-4f);
    CHECK(std::fabs(back.h - gt.h) < 1e-4f);
    const float dyaw = normalize_angle(back.yaw - gt.yaw);
    CHECK(std::fabs(dyaw) < 1e-5f);
  }
}

TEST_CASE("iou_2d basics") {
  const Box2D a{0, 0, 10, 10};
  CHECK(iou_2d(a, a) == 1.0);
  const Box2D b{20, 20, 30, 30};
  CHECK(iou_2d(a, b) == 0.0);
  const Box2D half{5, 0, 15, 10};
  CHECK(iou_2d(a, half) == Catch::Approx(50.0 / 150.0));
  const Box2D degenerate{1, 1, 1, 1};
  CHECK(iou_2d(degenerate, degenerate) == 0.0);  // zero-area union convention
}

TEST_CASE("iou_bev exact cases") {
  Box3D a;
  a.cx = 0;
  a.cy = 0;
  a.w = 1;
  a.l = 1;
  a.h = 1;
  a.yaw = 0;
  CHECK(iou_bev(a, a) == Catch::Approx(1.0));

  Box3D rot = a;
  rot.yaw = static_cast<float>(kPi / 4);
  const double mc = iou_bev_monte_carlo(a, rot, 1000000, 0xAEAE);
  CHECK(std::fabs(iou_bev(a, rot) - mc) < 0.003);

  Box3D far = a;
  far.cx = 10;
  CHECK(iou_bev(a, far) == 0.0);

  // A rectangle is symmetric under a pi rotation.
  Box3D pi_rot = a;
  pi_rot.yaw = static_cast<float>(kPi);
  CHECK(iou_bev(a, pi_rot) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("iou_bev matches the Monte-Carlo oracle on random pairs") {
  std::mt19937_64 rng(0xBEB0);
  for (int pair = 0; pair < 20; ++pair) {
    const Box3D a = random_box3d(rng);
    Box3D b = random_box3d(rng);
    // Pull b toward a so a good share of pairs overlap.
    b.cx = 0.5f * (a.cx + b.cx);
    b.cy = 0.5f * (a.cy + b.cy);
    const double exact = iou_bev(a, b);
    const double mc = iou_bev_monte_carlo(a, b, 1000000, 0x1000 + pair);
    CAPTURE(pair, exact, mc);
    CHECK(std::fabs(exact - mc) < 0.003);
  }
}

TEST_CASE("iou functions are symmetric and bounded") {
  std::mt19937_64 rng(0x5F5F);
  for (int t = 0; t < 200; ++t) {
    const Box3D a = random_box3d(rng);
    const Box3D b = random_box3d(rng);
    const double ab = iou_bev(a, b);
    const double ba = iou_bev(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == Catch::Approx(ba).margin(1e-12));
  }
}

TEST_CASE("nms keeps the best of two identical boxes") {
  std::vector<Detection2D> dets;
  dets.push_back({Box2D{0, 0, 10, 10}, 0.9f, 0});
  dets.push_back({Box2D{0, 0, 10, 10}, 0.8f, 0});
  const auto kept = nms_2d(dets, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9f);
}

TEST_CASE("nms keeps disjoint boxes and respects classes") {
  std::vector<Detection2D> dets;
  dets.push_back({Box2D{0, 0, 10, 10}, 0.9f, 0});
  dets.push_back({Box2D{100, 100, 110, 110}, 0.5f, 0});
  dets.push_back({Box2D{0, 0, 10, 10}, 0.8f, 1});  // other class survives
  const auto kept = nms_2d(dets, 0.5);
  CHECK(kept.size() == 3);
}

TEST_CASE("nms equals the quadratic reference on 1000 random boxes") {
  std::mt19937_64 rng(0x1234);
  std::uniform_real_distribution<float> pos(0.0f, 200.0f);
  std::uniform_real_distribution<float> size(5.0f, 60.0f);
  std::uniform_real_distribution<float> score(0.0f, 1.0f);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<Detection2D> dets;
  for (int i = 0; i < 1000; ++i) {
    const float x = pos(rng), y = pos(rng), w = size(rng), h = size(rng);
    dets.push_back({Box2D{x, y, x + w, y + h}, score(rng), cls(rng)});
  }
  // Force exact score ties to exercise the index tie-break.
  for (int i = 0; i < 50; ++i) dets[i * 2 + 1].score = dets[i * 2].score;

  const auto got = nms_2d(dets, 0.5);
  const auto want = nms_reference(dets, 0.5);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].score == want[i].score);
    CHECK(got[i].class_id == want[i].class_id);
    CHECK(got[i].box.x1 == want[i].box.x1);
    CHECK(got[i].box.y1 == want[i].box.y1);
  }
}

TEST_CASE("nms output scores are non-increasing and within threshold") {
  std::mt19937_64 rng(0x4321);
  std::uniform_real_distribution<float> pos(0.0f, 100.0f);
  std::uniform_real_distribution<float> score(0.0f, 1.0f);
  std::vector<Detection2D> dets;
  for (int i = 0; i < 300; ++i) {
    const float x = pos(rng), y = pos(rng);
    dets.push_back({Box2D{x, y, x + 20, y + 20}, score(rng), 0});
  }
  const auto kept = nms_2d(dets, 0.4);
  for (std::size_t i = 1; i < kept.size(); ++i) {
    CHECK(kept[i].score <= kept[i - 1].score);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      CHECK(iou_2d(kept[i].box, kept[j].box) <= 0.4);
    }
  }
}

TEST_CASE("nms is invariant under monotone score transforms") {
  std::mt19937_64 rng(0x9999);
  std::uniform_real_distribution<float> pos(0.0f, 100.0f);
  std::uniform_real_distribution<float> score(0.01f, 1.0f);
  std::vector<Detection2D> dets;
  for (int i = 0; i < 200; ++i) {
    const float x = pos(rng), y = pos(rng);
    dets.push_back({Box2D{x, y, x + 25, y + 25}, score(rng), i % 2});
  }
  std::vector<Detection2D> transformed = dets;
  for (auto& d : transformed) d.score = 2.0f * d.score + 1.0f;

  const auto a = nms_2d(dets, 0.5);
  const auto b = nms_2d(transformed, 0.5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].box.x1 == b[i].box.x1);
    CHECK(a[i].class_id == b[i].class_id);
  }
}

TEST_CASE("score_filter thresholds after sigmoid") {
  const Tensor logits = Tensor::f32({2, 3}, {-10, 0, 10, 5, -5, 0.1f});
  CHECK(score_filter(logits, 1.0f).empty());
  CHECK(score_filter(logits, 0.0f).size() == 6);

  const auto mid = score_filter(logits, 0.5f);
  // sigmoid > 0.5 iff logit > 0.
  REQUIRE(mid.size() == 3);
  CHECK(mid[0].anchor == 0);
  CHECK(mid[0].class_id == 2);
  CHECK(mid[1].anchor == 1);
  CHECK(mid[1].class_id == 0);
  CHECK(mid[2].class_id == 2);
}

TEST_CASE("score_filter matches a scalar oracle on random logits") {
  const Tensor logits = test::random_f32({50, 4}, -3.0f, 3.0f, 0x50F7);
  const float thr = 0.3f;
  const auto got = score_filter(logits, thr);
  std::vector<ScoredAnchor> want;
  for (std::int64_t a = 0; a < 50; ++a) {
    for (std::int64_t k = 0; k < 4; ++k) {
      const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.fdata()[a * 4 + k])));
      if (s > thr) want.push_back({a, static_cast<int>(k), static_cast<float>(s)});
    }
  }
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].anchor == want[i].anchor);
    CHECK(got[i].class_id == want[i].class_id);
    CHECK(got[i].score == Catch::Approx(want[i].score).margin(1e-6));
  }
}
