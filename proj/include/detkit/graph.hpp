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

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/tensor.hpp"

namespace detkit {

// The node set is closed and control-flow free: everything a traced
// inference graph needs, nothing more. Batch norm exists only in its folded
// (per-channel affine) form.
enum class OpKind {
  kConv2d,
  kLinear,
  kRelu,
  kBatchNormFolded,
  kMaxReduce,
  kConcat,
  kUpsampleNearest2x,
  kAdd,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kLinear: return "linear";
    case OpKind::kRelu: return "relu";
    case OpKind::kBatchNormFolded: return "batch_norm_folded";
    case OpKind::kMaxReduce: return "max_reduce";
    case OpKind::kConcat: return "concat";
    case OpKind::kUpsampleNearest2x: return "upsample_nearest_2x";
    case OpKind::kAdd: return "add";
  }
  return "?";
}

inline OpKind parse_op_kind(const std::string& s) {
  if (s == "conv2d") return OpKind::kConv2d;
  if (s == "linear") return OpKind::kLinear;
  if (s == "relu") return OpKind::kRelu;
  if (s == "batch_norm_folded") return OpKind::kBatchNormFolded;
  if (s == "max_reduce") return OpKind::kMaxReduce;
  if (s == "concat") return OpKind::kConcat;
  if (s == "upsample_nearest_2x") return OpKind::kUpsampleNearest2x;
  if (s == "add") return OpKind::kAdd;
  throw std::invalid_argument("unknown node kind: " + s);
}

// Nodes are identified by the edge they produce; every value name (graph
// input, constant, node output) lives in one namespace.
struct Node {
  OpKind kind = OpKind::kRelu;
  std::vector<std::string> inputs;
  std::string output;

  // Conv2d
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  // Linear
  int out_features = 0;
  // MaxReduce / Concat / BatchNormFolded; negative counts from the back.
  int axis = 0;
  // Constant names (weight doubles as the per-channel scale of a folded
  // batch norm, bias as its shift). Empty bias means none.
  std::string weight;
  std::string bias;
};

struct GraphInput {
  std::string name;
  std::vector<std::int64_t> shape;
};

struct Graph {
  std::vector<GraphInput> inputs;
  std::vector<Node> nodes;  // topological order
  std::map<std::string, Tensor> constants;
  std::vector<std::string> outputs;  // may name constants (e.g. anchor tensors)
};

using Shape = std::vector<std::int64_t>;
using ShapeTable = std::map<std::string, Shape>;

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int normalize_axis(int axis, int rank, const std::string& node) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw GraphError("node '" + node + "': axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return a;
}

inline const Tensor& find_constant(const Graph& g, const std::string& name,
                                   const std::string& node) {
  auto it = g.constants.find(name);
  if (it == g.constants.end()) {
    throw GraphError("node '" + node + "': unknown constant '" + name + "'");
  }
  return it->second;
}

// Shape of one node given its input shapes; throws GraphError on mismatch.
inline Shape infer_node_shape(const Graph& g, const Node& n,
                              const std::vector<Shape>& in_shapes) {
  const std::string& id = n.output;
  auto expect_inputs = [&](std::size_t k) {
    if (in_shapes.size() != k) {
      throw GraphError("node '" + id + "': expected " + std::to_string(k) +
                       " inputs, got " + std::to_string(in_shapes.size()));
    }
  };
  switch (n.kind) {
    case OpKind::kConv2d: {
      expect_inputs(1);
      const Shape& s = in_shapes[0];
      if (s.size() != 3 && s.size() != 4) {
        throw GraphError("node '" + id + "': conv2d input must be (C,H,W) or (B,C,H,W)");
      }
      const bool batched = s.size() == 4;
      const std::int64_t in_ch = s[batched ? 1 : 0];
      const std::int64_t h = s[batched ? 2 : 1];
      const std::int64_t w = s[batched ? 3 : 2];
      const Tensor& wt = find_constant(g, n.weight, id);
      const Shape want = {n.out_channels, in_ch, n.kernel, n.kernel};
      if (wt.shape() != want) {
        throw GraphError("node '" + id + "': weight shape " + shape_str(wt.shape()) +
                         " does not match " + shape_str(want));
      }
      if (!n.bias.empty()) {
        const Tensor& bt = find_constant(g, n.bias, id);
        if (bt.shape() != Shape{n.out_channels}) {
          throw GraphError("node '" + id + "': bias shape mismatch");
        }
      }
      if (n.stride < 1 || n.kernel < 1) {
        throw GraphError("node '" + id + "': bad conv parameters");
      }
      const std::int64_t oh = (h + 2 * n.padding - n.kernel) / n.stride + 1;
      const std::int64_t ow = (w + 2 * n.padding - n.kernel) / n.stride + 1;
      if (oh < 1 || ow < 1 || h + 2 * n.padding < n.kernel || w + 2 * n.padding < n.kernel) {
        throw GraphError("node '" + id + "': kernel does not fit input " + shape_str(s));
      }
      if (batched) return {s[0], n.out_channels, oh, ow};
      return {n.out_channels, oh, ow};
    }
    case OpKind::kLinear: {
      expect_inputs(1);
      const Shape& s = in_shapes[0];
      if (s.empty()) throw GraphError("node '" + id + "': linear input needs rank >= 1");
      const Tensor& wt = find_constant(g, n.weight, id);
      const Shape want = {n.out_features, s.back()};
      if (wt.shape() != want) {
        throw GraphError("node '" + id + "': weight shape " + shape_str(wt.shape()) +
                         " does not match " + shape_str(want));
      }
      if (!n.bias.empty()) {
        const Tensor& bt = find_constant(g, n.bias, id);
        if (bt.shape() != Shape{n.out_features}) {
          throw GraphError("node '" + id + "': bias shape mismatch");
        }
      }
      Shape out = s;
      out.back() = n.out_features;
      return out;
    }
    case OpKind::kRelu: {
      expect_inputs(1);
      return in_shapes[0];
    }
    case OpKind::kBatchNormFolded: {
      expect_inputs(1);
      const Shape& s = in_shapes[0];
      const int a = normalize_axis(n.axis, static_cast<int>(s.size()), id);
      const Tensor& sc = find_constant(g, n.weight, id);
      if (sc.shape() != Shape{s[a]}) {
        throw GraphError("node '" + id + "': scale length does not match channel dim");
      }
      const Tensor& sh = find_constant(g, n.bias, id);
      if (sh.shape() != Shape{s[a]}) {
        throw GraphError("node '" + id + "': shift length does not match channel dim");
      }
      return s;
    }
    case OpKind::kMaxReduce: {
      expect_inputs(1);
      const Shape& s = in_shapes[0];
      const int a = normalize_axis(n.axis, static_cast<int>(s.size()), id);
      Shape out;
      for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i != a) out.push_back(s[i]);
      }
      return out;
    }
    case OpKind::kConcat: {
      if (in_shapes.size() < 2) {
        throw GraphError("node '" + id + "': concat needs at least 2 inputs");
      }
      const Shape& first = in_shapes[0];
      const int a = normalize_axis(n.axis, static_cast<int>(first.size()), id);
      Shape out = first;
      for (std::size_t k = 1; k < in_shapes.size(); ++k) {
        const Shape& s = in_shapes[k];
        if (s.size() != first.size()) {
          throw GraphError("node '" + id + "': concat rank mismatch");
        }
        for (int i = 0; i < static_cast<int>(s.size()); ++i) {
          if (i == a) continue;
          if (s[i] != first[i]) {
            throw GraphError("node '" + id + "': concat dim mismatch at axis " +
                             std::to_string(i));
          }
        }
        out[a] += s[a];
      }
      return out;
    }
    case OpKind::kUpsampleNearest2x: {
      expect_inputs(1);
      Shape s = in_shapes[0];
      if (s.size() < 2) {
        throw GraphError("node '" + id + "': upsample needs rank >= 2");
      }
      s[s.size() - 2] *= 2;
      s[s.size() - 1] *= 2;
      return s;
    }
    case OpKind::kAdd: {
      expect_inputs(2);
      if (in_shapes[0] != in_shapes[1]) {
        throw GraphError("node '" + id + "': add shape mismatch " +
                         shape_str(in_shapes[0]) + " vs " + shape_str(in_shapes[1]));
      }
      return in_shapes[0];
    }
  }
  throw GraphError("node '" + id + "': unknown kind");
}

}  // namespace detail

// Checks wiring and infers every edge shape. Node order must already be
// topological: each input has to be a graph input, a constant, or the output
// of an earlier node, which also rules out cycles. Optional input-shape
// overrides let one graph run at several resolutions.
inline ShapeTable validate(const Graph& g, const ShapeTable& input_overrides = {}) {
  ShapeTable shapes;
  std::set<std::string> defined;

  for (const auto& in : g.inputs) {
    if (!defined.insert(in.name).second) {
      throw GraphError("duplicate name '" + in.name + "'");
    }
    auto it = input_overrides.find(in.name);
    shapes[in.name] = (it != input_overrides.end()) ? it->second : in.shape;
    for (std::int64_t d : shapes[in.name]) {
      if (d <= 0) throw GraphError("input '" + in.name + "': non-positive dim");
    }
  }
  for (const auto& [name, c] : g.constants) {
    if (!defined.insert(name).second) {
      throw GraphError("duplicate name '" + name + "'");
    }
    shapes[name] = c.shape();
  }

  for (const Node& n : g.nodes) {
    if (n.output.empty()) throw GraphError("node with empty output name");
    std::vector<Shape> in_shapes;
    for (const auto& in : n.inputs) {
      auto it = shapes.find(in);
      if (it == shapes.end() || defined.count(in) == 0) {
        throw GraphError("node '" + n.output + "': input '" + in +
                         "' is not defined before use (dangling edge or cycle)");
      }
      in_shapes.push_back(it->second);
    }
    Shape out = detail::infer_node_shape(g, n, in_shapes);
    if (!defined.insert(n.output).second) {
      throw GraphError("duplicate name '" + n.output + "'");
    }
    shapes[n.output] = std::move(out);
  }

  for (const auto& out : g.outputs) {
    if (shapes.find(out) == shapes.end()) {
      throw GraphError("graph output '" + out + "' is not produced by any node");
    }
  }
  return shapes;
}

}  // namespace detkit
