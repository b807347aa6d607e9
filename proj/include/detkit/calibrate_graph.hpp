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
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/calibration.hpp"
#include "detkit/execute.hpp"
#include "detkit/graph.hpp"

namespace detkit {

// Runs the graph in f32 over the calibration set and derives one QuantParams
// per activation edge with the requested method. Weight constants are always
// calibrated minmax: their ranges are known exactly, activations are what
// needs data. Two passes over the dataset: the first pins per-edge amax so
// histogram bins line up with the observed range, the second fills them.
inline CalibrationTable calibrate_graph(const Graph& g,
                                        const std::vector<std::map<std::string, Tensor>>& dataset,
                                        CalibMethod method, int num_bins = 2048) {
  if (dataset.empty()) throw std::invalid_argument("calibrate_graph: empty dataset");
  validate(g);

  std::map<std::string, double> edge_amax;
  for (const auto& item : dataset) {
    const auto edges = execute_all_edges(g, item);
    for (const auto& [name, t] : edges) {
      if (g.constants.count(name) != 0) continue;  // constants are not activations
      double& a = edge_amax[name];
      for (float v : t.fdata()) {
        if (!std::isfinite(v)) continue;
        const double av = std::fabs(static_cast<double>(v));
        if (av > a) a = av;
      }
    }
  }

  std::map<std::string, ActivationHistogram> hists;
  for (const auto& [name, amax] : edge_amax) {
    if (!(amax > 0.0)) {
      throw std::runtime_error("calibrate_graph: edge '" + name +
                               "' has all-zero activations over the dataset");
    }
    hists.emplace(name, ActivationHistogram(num_bins, amax / num_bins));
  }
  for (const auto& item : dataset) {
    const auto edges = execute_all_edges(g, item);
    for (auto& [name, h] : hists) h.collect(edges.at(name));
  }

  CalibrationTable table;
  for (auto& [name, h] : hists) {
    CalibEntry e;
    e.method = method;
    e.amax = h.amax();
    e.num_bins = h.num_bins();
    e.scale = (method == CalibMethod::kMinMax ? calibrate_minmax(h) : calibrate_entropy(h)).scale;
    table.entries[name] = e;
  }

  // Weights of matmul-style nodes, from their exact ranges.
  for (const Node& n : g.nodes) {
    if (n.kind != OpKind::kConv2d && n.kind != OpKind::kLinear) continue;
    const Tensor& w = g.constants.at(n.weight);
    double amax = 0.0;
    for (float v : w.fdata()) amax = std::max(amax, std::fabs(static_cast<double>(v)));
    if (!(amax > 0.0)) {
      throw std::runtime_error("calibrate_graph: weight '" + n.weight + "' is all zero");
    }
    CalibEntry e;
    e.method = CalibMethod::kMinMax;
    e.amax = amax;
    e.num_bins = 0;
    e.scale = static_cast<float>(amax / 127.0);
    table.entries[n.weight] = e;
  }
  return table;
}

inline CalibrationTable calibrate_graph(const Graph& g, const std::vector<Tensor>& dataset,
                                        CalibMethod method, int num_bins = 2048) {
  if (g.inputs.size() != 1) {
    throw std::invalid_argument("calibrate_graph: tensor-list dataset needs a single-input graph");
  }
  std::vector<std::map<std::string, Tensor>> items;
  items.reserve(dataset.size());
  for (const Tensor& t : dataset) items.push_back({{g.inputs[0].name, t}});
  return calibrate_graph(g, items, method, num_bins);
}

}  // namespace detkit
