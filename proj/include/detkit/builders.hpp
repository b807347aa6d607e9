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

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/anchors.hpp"
#include "detkit/graph.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

// Miniature but structurally faithful builds of the two deployment
// architectures. The trained originals are out of scope; these keep the
// topological features the experiments exercise (pyramid merge, shared
// heads, per-point net + max) at desk-scale channel widths.

namespace detail {

inline Tensor random_weights(std::vector<std::int64_t> shape, float stddev,
                             std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = dist(rng);
  return Tensor::f32(std::move(shape), std::move(v));
}

inline Node make_conv(const std::string& out, const std::string& in, int out_ch, int k,
                      int stride, int pad, const std::string& w, const std::string& b) {
  Node n;
  n.kind = OpKind::kConv2d;
  n.inputs = {in};
  n.output = out;
  n.out_channels = out_ch;
  n.kernel = k;
  n.stride = stride;
  n.padding = pad;
  n.weight = w;
  n.bias = b;
  return n;
}

inline Node make_relu(const std::string& out, const std::string& in) {
  Node n;
  n.kind = OpKind::kRelu;
  n.inputs = {in};
  n.output = out;
  return n;
}

inline Node make_add(const std::string& out, const std::string& a, const std::string& b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a, b};
  n.output = out;
  return n;
}

// Conv + ReLU. Weights land in the graph's constant map.
inline void add_conv_relu(Graph& g, std::mt19937_64& rng, const std::string& name,
                          const std::string& in, int in_ch, int out_ch, int k, int stride,
                          int pad) {
  const float stddev = 1.0f / std::sqrt(static_cast<float>(in_ch * k * k));
  g.constants[name + "_w"] = random_weights({out_ch, in_ch, k, k}, stddev, rng);
  g.constants[name + "_b"] = random_weights({out_ch}, 0.05f, rng);
  g.nodes.push_back(make_conv(name, in, out_ch, k, stride, pad, name + "_w", name + "_b"));
  g.nodes.push_back(make_relu(name + "_r", name));
}

}  // namespace detail

// ---- Pillar Feature Network ----

struct PfnConfig {
  int in_features = 9;    // D
  int out_features = 64;  // C
  int max_pillars = 16000;
  int max_points = 32;
  std::uint64_t seed = 1;
};

// Per-point linear + folded batch norm + relu, then max over the points of
// each pillar: (P, N, D) -> (P, C).
inline Graph build_pfn_toy(const PfnConfig& cfg) {
  if (cfg.in_features < 1 || cfg.out_features < 1 || cfg.max_pillars < 1 || cfg.max_points < 1) {
    throw std::invalid_argument("pfn config: dimensions must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  Graph g;
  g.inputs = {{"points", {cfg.max_pillars, cfg.max_points, cfg.in_features}}};

  const float stddev = 1.0f / std::sqrt(static_cast<float>(cfg.in_features));
  g.constants["pfn_linear_w"] =
      detail::random_weights({cfg.out_features, cfg.in_features}, stddev, rng);
  Node lin;
  lin.kind = OpKind::kLinear;
  lin.inputs = {"points"};
  lin.output = "pfn_linear";
  lin.out_features = cfg.out_features;
  lin.weight = "pfn_linear_w";
  g.nodes.push_back(lin);

  // Folded batch norm over the feature (last) axis.
  std::vector<float> bn_scale(static_cast<std::size_t>(cfg.out_features));
  std::vector<float> bn_shift(static_cast<std::size_t>(cfg.out_features));
  std::uniform_real_distribution<float> sdist(0.8f, 1.2f);
  std::uniform_real_distribution<float> bdist(-0.1f, 0.1f);
  for (auto& v : bn_scale) v = sdist(rng);
  for (auto& v : bn_shift) v = bdist(rng);
  g.constants["pfn_bn_scale"] = Tensor::f32({cfg.out_features}, std::move(bn_scale));
  g.constants["pfn_bn_shift"] = Tensor::f32({cfg.out_features}, std::move(bn_shift));
  Node bn;
  bn.kind = OpKind::kBatchNormFolded;
  bn.inputs = {"pfn_linear"};
  bn.output = "pfn_bn";
  bn.axis = -1;
  bn.weight = "pfn_bn_scale";
  bn.bias = "pfn_bn_shift";
  g.nodes.push_back(bn);

  g.nodes.push_back(detail::make_relu("pfn_relu", "pfn_bn"));

  Node mr;
  mr.kind = OpKind::kMaxReduce;
  mr.inputs = {"pfn_relu"};
  mr.output = "pillar_features";
  mr.axis = 1;  // the N axis
  g.nodes.push_back(mr);

  g.outputs = {"pillar_features"};
  return g;
}

// ---- RetinaNet-style toy ----

struct RetinaNetToyConfig {
  int height = 64;
  int width = 64;
  int num_classes = 5;
  int base_channels = 8;   // backbone width at stride 2
  int fpn_channels = 16;
  AnchorConfig2D anchors;  // strides fixed to {8, 16} by the pyramid
  std::uint64_t seed = 2;
};

// Small residual backbone, a two-level top-down pyramid, and class/box heads
// whose weights are shared across levels. Anchors ride along as a constant
// tensor and a graph output.
inline Graph build_retinanet_toy(const RetinaNetToyConfig& cfg) {
  if (cfg.height % 16 != 0 || cfg.width % 16 != 0) {
    throw std::invalid_argument("retinanet toy: resolution must be divisible by 16");
  }
  if (cfg.num_classes < 1 || cfg.base_channels < 1 || cfg.fpn_channels < 1) {
    throw std::invalid_argument("retinanet toy: bad channel configuration");
  }
  AnchorConfig2D acfg = cfg.anchors;
  acfg.strides = {8, 16};

  std::mt19937_64 rng(cfg.seed);
  Graph g;
  g.inputs = {{"image", {3, cfg.height, cfg.width}}};
  const int c1 = cfg.base_channels;
  const int c2 = 2 * cfg.base_channels;
  const int c3 = 4 * cfg.base_channels;
  const int fc = cfg.fpn_channels;

  // Backbone: stride 2 stem, then residual stages at strides 4, 8, 16.
  detail::add_conv_relu(g, rng, "stem", "image", 3, c1, 3, 2, 1);
  detail::add_conv_relu(g, rng, "down1", "stem_r", c1, c1, 3, 2, 1);

  const float res_std = 1.0f / std::sqrt(static_cast<float>(c1 * 9));
  g.constants["res1_w"] = detail::random_weights({c1, c1, 3, 3}, res_std, rng);
  g.nodes.push_back(detail::make_conv("res1", "down1_r", c1, 3, 1, 1, "res1_w", ""));
  g.nodes.push_back(detail::make_add("res1_sum", "res1", "down1_r"));
  g.nodes.push_back(detail::make_relu("res1_out", "res1_sum"));

  detail::add_conv_relu(g, rng, "down2", "res1_out", c1, c2, 3, 2, 1);  // stride 8
  const float res2_std = 1.0f / std::sqrt(static_cast<float>(c2 * 9));
  g.constants["res2_w"] = detail::random_weights({c2, c2, 3, 3}, res2_std, rng);
  g.nodes.push_back(detail::make_conv("res2", "down2_r", c2, 3, 1, 1, "res2_w", ""));
  g.nodes.push_back(detail::make_add("res2_sum", "res2", "down2_r"));
  g.nodes.push_back(detail::make_relu("c3_feat", "res2_sum"));

  detail::add_conv_relu(g, rng, "down3", "c3_feat", c2, c3, 3, 2, 1);  // stride 16
  const float res3_std = 1.0f / std::sqrt(static_cast<float>(c3 * 9));
  g.constants["res3_w"] = detail::random_weights({c3, c3, 3, 3}, res3_std, rng);
  g.nodes.push_back(detail::make_conv("res3", "down3_r", c3, 3, 1, 1, "res3_w", ""));
  g.nodes.push_back(detail::make_add("res3_sum", "res3", "down3_r"));
  g.nodes.push_back(detail::make_relu("c4_feat", "res3_sum"));

  // Top-down pyramid: lateral 1x1 projections, upsample, add, smooth.
  const float lat_std = 1.0f / std::sqrt(static_cast<float>(c3));
  g.constants["lat4_w"] = detail::random_weights({fc, c3, 1, 1}, lat_std, rng);
  g.nodes.push_back(detail::make_conv("p4_lat", "c4_feat", fc, 1, 1, 0, "lat4_w", ""));
  const float lat3_std = 1.0f / std::sqrt(static_cast<float>(c2));
  g.constants["lat3_w"] = detail::random_weights({fc, c2, 1, 1}, lat3_std, rng);
  g.nodes.push_back(detail::make_conv("p3_lat", "c3_feat", fc, 1, 1, 0, "lat3_w", ""));

  Node up;
  up.kind = OpKind::kUpsampleNearest2x;
  up.inputs = {"p4_lat"};
  up.output = "p4_up";
  g.nodes.push_back(up);
  g.nodes.push_back(detail::make_add("p3_sum", "p3_lat", "p4_up"));

  const float smooth_std = 1.0f / std::sqrt(static_cast<float>(fc * 9));
  g.constants["smooth3_w"] = detail::random_weights({fc, fc, 3, 3}, smooth_std, rng);
  g.nodes.push_back(detail::make_conv("p3", "p3_sum", fc, 3, 1, 1, "smooth3_w", ""));

  // Heads shared across pyramid levels: the node pairs reference the same
  // weight constants.
  const int anchors_per_cell = acfg.anchors_per_cell();
  const int cls_ch = anchors_per_cell * cfg.num_classes;
  const int box_ch = anchors_per_cell * 4;
  const float head_std = 1.0f / std::sqrt(static_cast<float>(fc * 9));
  g.constants["head_w"] = detail::random_weights({fc, fc, 3, 3}, head_std, rng);
  g.constants["head_b"] = detail::random_weights({fc}, 0.05f, rng);
  g.constants["cls_w"] = detail::random_weights({cls_ch, fc, 3, 3}, head_std, rng);
  g.constants["cls_b"] = detail::random_weights({cls_ch}, 0.05f, rng);
  g.constants["box_w"] = detail::random_weights({box_ch, fc, 3, 3}, 0.1f * head_std, rng);
  g.constants["box_b"] = detail::random_weights({box_ch}, 0.01f, rng);

  for (const std::string level : {std::string("p3"), std::string("p4")}) {
    const std::string feat = level == "p4" ? "p4_lat" : "p3";
    g.nodes.push_back(
        detail::make_conv(level + "_head", feat, fc, 3, 1, 1, "head_w", "head_b"));
    g.nodes.push_back(detail::make_relu(level + "_head_r", level + "_head"));
    g.nodes.push_back(detail::make_conv("cls_" + level, level + "_head_r", cls_ch, 3, 1, 1,
                                        "cls_w", "cls_b"));
    g.nodes.push_back(detail::make_conv("box_" + level, level + "_head_r", box_ch, 3, 1, 1,
                                        "box_w", "box_b"));
  }

  g.constants["anchors"] = generate_anchors_2d(cfg.height, cfg.width, acfg);
  g.outputs = {"cls_p3", "box_p3", "cls_p4", "box_p4", "anchors"};
  return g;
}

// ---- PointPillars 2D CNN toy ----

struct Cnn2dToyConfig {
  int in_channels = 64;    // C from the PFN
  int grid_h = 0;          // BEV rows; must be divisible by 4
  int grid_w = 0;
  int num_classes = 3;
  int rotations_per_class = 2;
  int base_channels = 16;
  int up_channels = 16;    // per branch before concat
  std::uint64_t seed = 3;
};

// Downsampling stack, upsample-and-concat merge, and three 1x1 heads
// (class, box, direction) on the stride-2 map.
inline Graph build_pointpillars_2dcnn_toy(const Cnn2dToyConfig& cfg) {
  if (cfg.grid_h % 4 != 0 || cfg.grid_w % 4 != 0 || cfg.grid_h <= 0 || cfg.grid_w <= 0) {
    throw std::invalid_argument("2dcnn toy: grid must be positive and divisible by 4");
  }
  if (cfg.in_channels < 1 || cfg.num_classes < 1 || cfg.rotations_per_class < 1) {
    throw std::invalid_argument("2dcnn toy: bad configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  Graph g;
  g.inputs = {{"bev", {cfg.in_channels, cfg.grid_h, cfg.grid_w}}};
  const int b1 = cfg.base_channels;
  const int b2 = 2 * cfg.base_channels;
  const int uc = cfg.up_channels;

  // Top-down: stride 2 and stride 4 blocks.
  detail::add_conv_relu(g, rng, "block1", "bev", cfg.in_channels, b1, 3, 2, 1);
  detail::add_conv_relu(g, rng, "block1b", "block1_r", b1, b1, 3, 1, 1);
  detail::add_conv_relu(g, rng, "block2", "block1b_r", b1, b2, 3, 2, 1);
  detail::add_conv_relu(g, rng, "block2b", "block2_r", b2, b2, 3, 1, 1);

  // Up branches back to stride 2, then channel concat.
  const float up1_std = 1.0f / std::sqrt(static_cast<float>(b1));
  g.constants["up1_w"] = detail::random_weights({uc, b1, 1, 1}, up1_std, rng);
  g.nodes.push_back(detail::make_conv("up1", "block1b_r", uc, 1, 1, 0, "up1_w", ""));

  Node up;
  up.kind = OpKind::kUpsampleNearest2x;
  up.inputs = {"block2b_r"};
  up.output = "block2_up";
  g.nodes.push_back(up);
  const float up2_std = 1.0f / std::sqrt(static_cast<float>(b2));
  g.constants["up2_w"] = detail::random_weights({uc, b2, 1, 1}, up2_std, rng);
  g.nodes.push_back(detail::make_conv("up2", "block2_up", uc, 1, 1, 0, "up2_w", ""));

  Node cat;
  cat.kind = OpKind::kConcat;
  cat.inputs = {"up1", "up2"};
  cat.output = "merged";
  cat.axis = 0;
  g.nodes.push_back(cat);
  g.nodes.push_back(detail::make_relu("merged_r", "merged"));

  // Heads at stride 2; every anchor scores every class.
  const int anchors_per_cell = cfg.num_classes * cfg.rotations_per_class;
  const int cls_ch = anchors_per_cell * cfg.num_classes;
  const int box_ch = anchors_per_cell * 7;
  const int dir_ch = anchors_per_cell * 2;
  const float head_std = 1.0f / std::sqrt(static_cast<float>(2 * uc));
  g.constants["cls_w"] = detail::random_weights({cls_ch, 2 * uc, 1, 1}, head_std, rng);
  g.constants["cls_b"] = detail::random_weights({cls_ch}, 0.05f, rng);
  g.constants["box_w"] = detail::random_weights({box_ch, 2 * uc, 1, 1}, 0.1f * head_std, rng);
  g.constants["box_b"] = detail::random_weights({box_ch}, 0.01f, rng);
  g.constants["dir_w"] = detail::random_weights({dir_ch, 2 * uc, 1, 1}, head_std, rng);
  g.constants["dir_b"] = detail::random_weights({dir_ch}, 0.05f, rng);
  g.nodes.push_back(detail::make_conv("cls", "merged_r", cls_ch, 1, 1, 0, "cls_w", "cls_b"));
  g.nodes.push_back(detail::make_conv("box", "merged_r", box_ch, 1, 1, 0, "box_w", "box_b"));
  g.nodes.push_back(detail::make_conv("dir", "merged_r", dir_ch, 1, 1, 0, "dir_w", "dir_b"));

  g.outputs = {"cls", "box", "dir"};
  return g;
}

}  // namespace detkit
