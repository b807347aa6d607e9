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
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/histogram.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

enum class CalibMethod { kMinMax, kEntropy };

inline const char* calib_method_name(CalibMethod m) {
  return m == CalibMethod::kMinMax ? "minmax" : "entropy";
}

inline CalibMethod parse_calib_method(const std::string& s) {
  if (s == "minmax") return CalibMethod::kMinMax;
  if (s == "entropy") return CalibMethod::kEntropy;
  throw std::invalid_argument("unknown calibration method: " + s);
}

// Scale from the maximum absolute activation: an equidistant symmetric
// mapping of [-amax, amax] onto [-127, 127].
inline QuantParams calibrate_minmax(const ActivationHistogram& h) {
  if (h.total() == 0 || !(h.amax() > 0.0)) {
    throw std::runtime_error("calibrate_minmax: no calibration data");
  }
  QuantParams qp;
  qp.scale = static_cast<float>(h.amax() / 127.0);
  return qp;
}

struct EntropyResult {
  int threshold_index = 0;  // number of kept bins i*
  double kl_divergence = 0.0;
  QuantParams params;
};

// Clipping-threshold search that minimizes the KL divergence between the
// observed distribution and its 128-level quantized approximation.
//
// For every candidate i in [128, num_bins]:
//   P: bins [0, i) with all mass above i folded into bin i-1, normalized.
//   Q: bins [0, i) collapsed into 128 groups (group g spans source bins
//      [g*i/128, (g+1)*i/128)), each group's mass re-expanded uniformly over
//      its nonzero source bins, normalized. Zero bins of Q where P is
//      nonzero get eps = 1e-10 before normalization.
// The smallest i with minimal KL(P||Q) wins. The returned scale clips at the
// observed amax, so it never exceeds the minmax scale.
inline EntropyResult calibrate_entropy_detail(const ActivationHistogram& h) {
  if (h.total() == 0 || !(h.amax() > 0.0)) {
    throw std::runtime_error("calibrate_entropy: no calibration data");
  }
  if (h.num_bins() < 256) {
    throw std::invalid_argument("calibrate_entropy: needs at least 256 bins");
  }
  constexpr int kLevels = 128;
  constexpr double kEps = 1e-10;
  const auto counts = h.counts();
  const int num_bins = h.num_bins();

  // Suffix sums give the clipped tail mass in O(1) per candidate.
  std::vector<double> suffix(static_cast<std::size_t>(num_bins) + 1, 0.0);
  for (int b = num_bins - 1; b >= 0; --b) {
    suffix[b] = suffix[b + 1] + static_cast<double>(counts[b]);
  }

  int best_i = -1;
  double best_kl = 0.0;
  std::vector<double> q(static_cast<std::size_t>(num_bins), 0.0);

  for (int i = kLevels; i <= num_bins; ++i) {
    // Q: collapse bins [0, i) into kLevels groups, spread over nonzero bins.
    double q_sum = 0.0;
    for (int g = 0; g < kLevels; ++g) {
      const int lo = static_cast<int>(static_cast<std::int64_t>(g) * i / kLevels);
      const int hi = static_cast<int>(static_cast<std::int64_t>(g + 1) * i / kLevels);
      double mass = 0.0;
      int nonzero = 0;
      for (int b = lo; b < hi; ++b) {
        mass += static_cast<double>(counts[b]);
        if (counts[b] != 0) ++nonzero;
      }
      for (int b = lo; b < hi; ++b) {
        q[b] = (counts[b] != 0 && nonzero > 0) ? mass / nonzero : 0.0;
      }
      q_sum += mass;
    }

    // P: kept bins plus the clipped tail in the last kept bin.
    const double tail = suffix[i];
    const double p_sum = suffix[0];

    // Smooth Q where P has mass but Q has none (only possible in bin i-1
    // when the tail lands on an otherwise empty bin).
    const double p_last = static_cast<double>(counts[i - 1]) + tail;
    if (p_last > 0.0 && q[i - 1] == 0.0) {
      q[i - 1] = kEps;
      q_sum += kEps;
    }

    double kl = 0.0;
    bool valid = p_sum > 0.0 && q_sum > 0.0;
    if (valid) {
      for (int b = 0; b < i; ++b) {
        const double pc = (b == i - 1) ? p_last : static_cast<double>(counts[b]);
        if (pc == 0.0) continue;
        const double pn = pc / p_sum;
        const double qn = q[b] / q_sum;
        kl += pn * std::log(pn / qn);
      }
    }

    if (valid && (best_i < 0 || kl < best_kl)) {
      best_i = i;
      best_kl = kl;
    }
  }

  if (best_i < 0) throw std::runtime_error("calibrate_entropy: no calibration data");

  EntropyResult r;
  r.threshold_index = best_i;
  r.kl_divergence = best_kl;
  const double threshold = std::min(static_cast<double>(best_i) * h.bin_width(), h.amax());
  r.params.scale = static_cast<float>(threshold / 127.0);
  return r;
}

inline QuantParams calibrate_entropy(const ActivationHistogram& h) {
  return calibrate_entropy_detail(h).params;
}

// Per-tensor calibration results, keyed by edge or weight-constant name.
struct CalibEntry {
  float scale = 1.0f;
  CalibMethod method = CalibMethod::kMinMax;
  double amax = 0.0;
  int num_bins = 0;  // 0 for weights (calibrated from exact ranges)
};

struct CalibrationTable {
  std::map<std::string, CalibEntry> entries;

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  const CalibEntry& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw std::runtime_error("calibration table: missing entry for '" + name + "'");
    }
    return it->second;
  }

  QuantParams params(const std::string& name) const {
    QuantParams qp;
    qp.scale = at(name).scale;
    return qp;
  }
};

inline nlohmann::json calibration_table_to_json(const CalibrationTable& table) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, e] : table.entries) {
    j[name] = {{"scale", e.scale},
               {"method", calib_method_name(e.method)},
               {"amax", e.amax},
               {"num_bins", e.num_bins}};
  }
  return j;
}

inline CalibrationTable calibration_table_from_json(const nlohmann::json& j) {
  CalibrationTable table;
  for (auto it = j.begin(); it != j.end(); ++it) {
    CalibEntry e;
    e.scale = it.value().at("scale").get<float>();
    e.method = parse_calib_method(it.value().at("method").get<std::string>());
    e.amax = it.value().value("amax", 0.0);
    e.num_bins = it.value().value("num_bins", 0);
    if (!(e.scale > 0.0f)) {
      throw std::runtime_error("calibration table: non-positive scale for '" + it.key() + "'");
    }
    table.entries[it.key()] = e;
  }
  return table;
}

inline void save_calibration_table(const std::string& path, const CalibrationTable& table) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("calibration table: cannot open for write: " + path);
  f << calibration_table_to_json(table).dump(2) << "\n";
}

inline CalibrationTable load_calibration_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("calibration table: cannot open: " + path);
  nlohmann::json j;
  f >> j;
  return calibration_table_from_json(j);
}

}  // namespace detkit
