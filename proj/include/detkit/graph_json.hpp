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

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/etf.hpp"
#include "detkit/graph.hpp"

namespace detkit {

// Graph description file: nodes, edges, and constant references into ETF
// tensor files (paths relative to the JSON file). This is the only format
// the CLI loads graphs through.
//
// {
//   "inputs":    [{"name": "image", "shape": [3, 64, 64]}],
//   "outputs":   ["cls_p3", ...],
//   "constants": {"stem_w": "consts/stem_w.etf", ...},
//   "nodes":     [{"kind": "conv2d", "inputs": ["image"], "output": "stem",
//                  "out_channels": 8, "kernel": 3, "stride": 2, "padding": 1,
//                  "weight": "stem_w", "bias": "stem_b"}, ...]
// }

inline nlohmann::json node_to_json(const Node& n) {
  nlohmann::json j;
  j["kind"] = op_kind_name(n.kind);
  j["inputs"] = n.inputs;
  j["output"] = n.output;
  switch (n.kind) {
    case OpKind::kConv2d:
      j["out_channels"] = n.out_channels;
      j["kernel"] = n.kernel;
      j["stride"] = n.stride;
      j["padding"] = n.padding;
      j["weight"] = n.weight;
      if (!n.bias.empty()) j["bias"] = n.bias;
      break;
    case OpKind::kLinear:
      j["out_features"] = n.out_features;
      j["weight"] = n.weight;
      if (!n.bias.empty()) j["bias"] = n.bias;
      break;
    case OpKind::kBatchNormFolded:
      j["axis"] = n.axis;
      j["weight"] = n.weight;
      j["bias"] = n.bias;
      break;
    case OpKind::kMaxReduce:
    case OpKind::kConcat:
      j["axis"] = n.axis;
      break;
    default:
      break;
  }
  return j;
}

inline Node node_from_json(const nlohmann::json& j) {
  Node n;
  n.kind = parse_op_kind(j.at("kind").get<std::string>());
  n.inputs = j.at("inputs").get<std::vector<std::string>>();
  n.output = j.at("output").get<std::string>();
  n.out_channels = j.value("out_channels", 0);
  n.kernel = j.value("kernel", 0);
  n.stride = j.value("stride", 1);
  n.padding = j.value("padding", 0);
  n.out_features = j.value("out_features", 0);
  n.axis = j.value("axis", 0);
  n.weight = j.value("weight", std::string());
  n.bias = j.value("bias", std::string());
  return n;
}

// Writes graph.json plus one ETF file per constant under <stem>_consts/.
inline void save_graph_json(const std::string& path, const Graph& g) {
  namespace fs = std::filesystem;
  const fs::path jpath(path);
  const fs::path dir = jpath.parent_path();
  const std::string const_dir_name = jpath.stem().string() + "_consts";
  const fs::path const_dir = dir / const_dir_name;
  fs::create_directories(const_dir);

  nlohmann::json j;
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : g.inputs) {
    j["inputs"].push_back({{"name", in.name}, {"shape", in.shape}});
  }
  j["outputs"] = g.outputs;
  nlohmann::json consts = nlohmann::json::object();
  for (const auto& [name, t] : g.constants) {
    const std::string rel = const_dir_name + "/" + name + ".etf";
    write_etf((dir / const_dir_name / (name + ".etf")).string(), t);
    consts[name] = rel;
  }
  j["constants"] = consts;
  j["nodes"] = nlohmann::json::array();
  for (const Node& n : g.nodes) j["nodes"].push_back(node_to_json(n));

  std::ofstream f(path);
  if (!f) throw std::runtime_error("graph: cannot open for write: " + path);
  f << j.dump(2) << "\n";
}

inline Graph load_graph_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("graph: cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("graph: " + path + ": " + e.what());
  }
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();

  Graph g;
  for (const auto& in : j.at("inputs")) {
    g.inputs.push_back({in.at("name").get<std::string>(),
                        in.at("shape").get<std::vector<std::int64_t>>()});
  }
  g.outputs = j.at("outputs").get<std::vector<std::string>>();
  for (auto it = j.at("constants").begin(); it != j.at("constants").end(); ++it) {
    g.constants[it.key()] = read_etf((dir / it.value().get<std::string>()).string());
  }
  for (const auto& nj : j.at("nodes")) g.nodes.push_back(node_from_json(nj));
  validate(g);
  return g;
}

}  // namespace detkit
