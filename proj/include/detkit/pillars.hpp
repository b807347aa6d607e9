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
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/execute.hpp"
#include "detkit/graph.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

struct PointCloud {
  // (x, y, z, intensity); meters and [0,1] reflectance.
  std::vector<std::array<float, 4>> points;
};

// ---- point cloud files: raw little-endian f32 quadruples, plus a JSON
// lines debug form {"x":..,"y":..,"z":..,"i":..} ----

inline void write_pointcloud_bin(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("pointcloud: cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(pc.points.data()),
          static_cast<std::streamsize>(pc.points.size() * sizeof(std::array<float, 4>)));
}

inline PointCloud read_pointcloud_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("pointcloud: cannot open: " + path);
  const std::streamsize bytes = f.tellg();
  if (bytes % 16 != 0) {
    throw std::runtime_error("pointcloud: size not a multiple of 16 bytes: " + path);
  }
  f.seekg(0);
  PointCloud pc;
  pc.points.resize(static_cast<std::size_t>(bytes / 16));
  f.read(reinterpret_cast<char*>(pc.points.data()), bytes);
  return pc;
}

inline void write_pointcloud_jsonl(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("pointcloud: cannot open for write: " + path);
  for (const auto& p : pc.points) {
    nlohmann::json j = {{"x", p[0]}, {"y", p[1]}, {"z", p[2]}, {"i", p[3]}};
    f << j.dump() << "\n";
  }
}

inline PointCloud read_pointcloud_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("pointcloud: cannot open: " + path);
  PointCloud pc;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    pc.points.push_back({j.at("x").get<float>(), j.at("y").get<float>(),
                         j.at("z").get<float>(), j.at("i").get<float>()});
  }
  return pc;
}

struct PillarConfig {
  float x_min = 0.0f, x_max = 69.12f;
  float y_min = -39.68f, y_max = 39.68f;
  float z_min = -3.0f, z_max = 1.0f;
  float pillar_dx = 0.16f, pillar_dy = 0.16f;
  int max_pillars = 16000;   // P
  int max_points = 32;       // N
  std::uint64_t rng_seed = 42;

  static constexpr int kPointFeatures = 9;  // D

  int grid_h() const {
    return static_cast<int>(std::ceil((y_max - y_min) / pillar_dy));
  }
  int grid_w() const {
    return static_cast<int>(std::ceil((x_max - x_min) / pillar_dx));
  }

  void check() const {
    if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min)) {
      throw std::invalid_argument("pillar config: degenerate ranges");
    }
    if (!(pillar_dx > 0.0f) || !(pillar_dy > 0.0f)) {
      throw std::invalid_argument("pillar config: pillar size must be positive");
    }
    if (max_pillars < 1 || max_points < 1) {
      throw std::invalid_argument("pillar config: P and N must be at least 1");
    }
  }
};

struct PillarBatch {
  Tensor features;                              // (P, N, 9)
  std::vector<std::array<std::int32_t, 2>> coords;  // (row, col) per pillar slot
  std::vector<std::int32_t> num_points;         // per pillar slot
  int num_pillars = 0;                          // populated slots
};

namespace detail {

// splitmix64 finalizer; decouples per-pillar streams from iteration order.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t pillar_stream_seed(std::uint64_t rng_seed, std::uint64_t tag,
                                        std::int64_t cell) {
  return mix64(rng_seed ^ mix64(tag ^ static_cast<std::uint64_t>(cell)));
}

// Keep the k smallest-keyed entries, stable in the original order. Keys are
// drawn once per entry, so shrinking k keeps a subset.
inline std::vector<std::size_t> sample_by_sorted_keys(const std::vector<std::uint64_t>& keys,
                                                      std::size_t k) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (keys.size() <= k) return idx;
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (keys[a] != keys[b]) return keys[a] < keys[b];
                     return a < b;
                   });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

// Discretize a cloud into pillars with the paper's sampling policy: at most
// N points per pillar and at most P non-empty pillars, both sampled without
// replacement from deterministic per-pillar RNG streams. Each kept point is
// augmented to (x, y, z, i, x-xm, y-ym, z-zm, x-xc, y-yc) with (xm,ym,zm)
// the mean of the pillar's kept points and (xc,yc) the pillar center.
inline PillarBatch pillarize(const PointCloud& pc, const PillarConfig& cfg) {
  cfg.check();
  const int grid_h = cfg.grid_h();
  const int grid_w = cfg.grid_w();

  // Group in-range points by cell, keeping first-appearance pillar order.
  std::map<std::int64_t, std::vector<std::size_t>> by_cell;
  std::vector<std::int64_t> pillar_order;
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw std::invalid_argument("pillarize: non-finite point coordinate at index " +
                                  std::to_string(i));
    }
    if (p[0] < cfg.x_min || p[0] >= cfg.x_max || p[1] < cfg.y_min || p[1] >= cfg.y_max ||
        p[2] < cfg.z_min || p[2] >= cfg.z_max) {
      continue;
    }
    const int col = static_cast<int>((p[0] - cfg.x_min) / cfg.pillar_dx);
    const int row = static_cast<int>((p[1] - cfg.y_min) / cfg.pillar_dy);
    if (col < 0 || col >= grid_w || row < 0 || row >= grid_h) continue;
    const std::int64_t cell = static_cast<std::int64_t>(row) * grid_w + col;
    auto [it, inserted] = by_cell.try_emplace(cell);
    if (inserted) pillar_order.push_back(cell);
    it->second.push_back(i);
  }

  // Over-P policy: a deterministic per-pillar key, smallest P keys survive.
  std::vector<std::int64_t> kept_cells = pillar_order;
  if (kept_cells.size() > static_cast<std::size_t>(cfg.max_pillars)) {
    std::vector<std::uint64_t> keys;
    keys.reserve(pillar_order.size());
    for (std::int64_t cell : pillar_order) {
      std::mt19937_64 eng(detail::pillar_stream_seed(cfg.rng_seed, 0x50ull, cell));
      keys.push_back(eng());
    }
    const auto sel = detail::sample_by_sorted_keys(keys, static_cast<std::size_t>(cfg.max_pillars));
    kept_cells.clear();
    for (std::size_t s : sel) kept_cells.push_back(pillar_order[s]);
  }

  PillarBatch batch;
  const int pmax = cfg.max_pillars;
  const int nmax = cfg.max_points;
  std::vector<float> feats(static_cast<std::size_t>(pmax) * nmax * PillarConfig::kPointFeatures,
                           0.0f);
  batch.coords.assign(static_cast<std::size_t>(pmax), {0, 0});
  batch.num_points.assign(static_cast<std::size_t>(pmax), 0);
  batch.num_pillars = static_cast<int>(kept_cells.size());

  for (std::size_t slot = 0; slot < kept_cells.size(); ++slot) {
    const std::int64_t cell = kept_cells[slot];
    const auto& members = by_cell.at(cell);
    const int row = static_cast<int>(cell / grid_w);
    const int col = static_cast<int>(cell % grid_w);

    // Over-N policy: one key per point in input order; smallest N survive.
    std::vector<std::size_t> kept(members.size());
    std::iota(kept.begin(), kept.end(), 0);
    if (members.size() > static_cast<std::size_t>(nmax)) {
      std::mt19937_64 eng(detail::pillar_stream_seed(cfg.rng_seed, 0x4eull, cell));
      std::vector<std::uint64_t> keys(members.size());
      for (auto& k : keys) k = eng();
      kept = detail::sample_by_sorted_keys(keys, static_cast<std::size_t>(nmax));
    }

    // Means in double: offsets must agree with exact arithmetic to ~1e-6
    // even at coordinates near 1e2 m.
    double mx = 0.0, my = 0.0, mz = 0.0;
    for (std::size_t k : kept) {
      const auto& p = pc.points[members[k]];
      mx += p[0];
      my += p[1];
      mz += p[2];
    }
    const double inv = 1.0 / static_cast<double>(kept.size());
    mx *= inv;
    my *= inv;
    mz *= inv;
    const double cx =
        cfg.x_min + (static_cast<double>(col) + 0.5) * static_cast<double>(cfg.pillar_dx);
    const double cy =
        cfg.y_min + (static_cast<double>(row) + 0.5) * static_cast<double>(cfg.pillar_dy);

    batch.coords[slot] = {row, col};
    batch.num_points[slot] = static_cast<std::int32_t>(kept.size());
    float* dst = feats.data() +
                 (static_cast<std::size_t>(slot) * nmax) * PillarConfig::kPointFeatures;
    for (std::size_t r = 0; r < kept.size(); ++r) {
      const auto& p = pc.points[members[kept[r]]];
      float* f = dst + r * PillarConfig::kPointFeatures;
      f[0] = p[0];
      f[1] = p[1];
      f[2] = p[2];
      f[3] = p[3];
      f[4] = static_cast<float>(p[0] - mx);
      f[5] = static_cast<float>(p[1] - my);
      f[6] = static_cast<float>(p[2] - mz);
      f[7] = static_cast<float>(p[0] - cx);
      f[8] = static_cast<float>(p[1] - cy);
    }
  }
  batch.features = Tensor::f32({pmax, nmax, PillarConfig::kPointFeatures}, std::move(feats));
  return batch;
}

// Place per-pillar feature vectors back on the grid: (P, C) -> (C, H, W).
inline Tensor scatter(const Tensor& pillar_features,
                      const std::vector<std::array<std::int32_t, 2>>& coords, int num_pillars,
                      int grid_h, int grid_w) {
  if (pillar_features.rank() != 2) {
    throw std::invalid_argument("scatter: pillar features must be (P, C)");
  }
  const std::int64_t p_cap = pillar_features.shape()[0];
  const std::int64_t channels = pillar_features.shape()[1];
  if (num_pillars < 0 || num_pillars > p_cap ||
      static_cast<std::size_t>(num_pillars) > coords.size()) {
    throw std::invalid_argument("scatter: num_pillars out of range");
  }
  std::vector<float> out(static_cast<std::size_t>(channels) * grid_h * grid_w, 0.0f);
  std::vector<char> seen(static_cast<std::size_t>(grid_h) * grid_w, 0);
  for (int s = 0; s < num_pillars; ++s) {
    const auto [row, col] = coords[static_cast<std::size_t>(s)];
    if (row < 0 || row >= grid_h || col < 0 || col >= grid_w) {
      throw std::invalid_argument("scatter: coord outside the grid at slot " + std::to_string(s));
    }
    char& flag = seen[static_cast<std::size_t>(row) * grid_w + col];
    if (flag) {
      throw std::invalid_argument("scatter: duplicate coord at slot " + std::to_string(s));
    }
    flag = 1;
    for (std::int64_t c = 0; c < channels; ++c) {
      out[static_cast<std::size_t>(c * grid_h + row) * grid_w + col] =
          pillar_features.fdata()[static_cast<std::size_t>(s) * channels + c];
    }
  }
  return Tensor::f32({channels, grid_h, grid_w}, std::move(out));
}

// pillarize -> PFN -> scatter. The PFN runs in f32 or f16 only: its inputs
// are metric coordinates spanning roughly +-100 m at centimeter accuracy,
// which an 8-bit grid cannot carry.
inline Tensor run_pillar_frontend(const PointCloud& pc, const PillarConfig& cfg,
                                  const Graph& pfn, Precision precision,
                                  const CalibrationTable* calib = nullptr) {
  if (precision == Precision::kI8) {
    throw std::invalid_argument(
        "pillar frontend: i8 is not supported for the PFN; point coordinates "
        "(range ~1e2 m, accuracy ~1e-2 m) lose essential information in 8 bits");
  }
  if (pfn.inputs.size() != 1 || pfn.outputs.size() != 1) {
    throw std::invalid_argument("pillar frontend: PFN must have one input and one output");
  }
  const PillarBatch batch = pillarize(pc, cfg);
  const auto outputs = execute(pfn, {{pfn.inputs[0].name, batch.features}}, precision, calib);
  const Tensor& pillar_feats = outputs.at(pfn.outputs[0]);
  if (pillar_feats.rank() != 2) {
    throw std::invalid_argument("pillar frontend: PFN output must be (P, C)");
  }
  return scatter(pillar_feats, batch.coords, batch.num_pillars, cfg.grid_h(), cfg.grid_w());
}

}  // namespace detkit
