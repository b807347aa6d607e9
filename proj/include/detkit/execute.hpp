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
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/calibration.hpp"
#include "detkit/graph.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

enum class Precision { kF32, kF16, kI8 };

inline const char* precision_name(Precision p) {
  switch (p) {
    case Precision::kF32: return "f32";
    case Precision::kF16: return "f16";
    case Precision::kI8: return "i8";
  }
  return "?";
}

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f16") return Precision::kF16;
  if (s == "i8") return Precision::kI8;
  throw std::invalid_argument("unknown precision: " + s);
}

namespace detail {

// ---- float kernels (shared by the f32 and f16 paths) ----

inline void conv2d_f32(const float* in, std::int64_t in_ch, std::int64_t h, std::int64_t w,
                       const float* wt, const float* bias, const Node& n,
                       std::int64_t oh, std::int64_t ow, float* out) {
  const std::int64_t kk = n.kernel;
  for (std::int64_t oc = 0; oc < n.out_channels; ++oc) {
    const float b = bias ? bias[oc] : 0.0f;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float acc = b;
        const std::int64_t iy0 = oy * n.stride - n.padding;
        const std::int64_t ix0 = ox * n.stride - n.padding;
        for (std::int64_t ic = 0; ic < in_ch; ++ic) {
          const float* in_c = in + ic * h * w;
          const float* w_c = wt + ((oc * in_ch + ic) * kk) * kk;
          for (std::int64_t ky = 0; ky < kk; ++ky) {
            const std::int64_t iy = iy0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (std::int64_t kx = 0; kx < kk; ++kx) {
              const std::int64_t ix = ix0 + kx;
              if (ix < 0 || ix >= w) continue;
              acc += in_c[iy * w + ix] * w_c[ky * kk + kx];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

inline void linear_f32(const float* in, std::int64_t rows, std::int64_t in_f,
                       const float* wt, const float* bias, std::int64_t out_f, float* out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* x = in + r * in_f;
    for (std::int64_t o = 0; o < out_f; ++o) {
      float acc = bias ? bias[o] : 0.0f;
      const float* wr = wt + o * in_f;
      for (std::int64_t i = 0; i < in_f; ++i) acc += x[i] * wr[i];
      out[r * out_f + o] = acc;
    }
  }
}

struct AxisSplit {
  std::int64_t outer = 1, axis = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit sp;
  for (int i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.axis = s[axis];
  for (int i = axis + 1; i < static_cast<int>(s.size()); ++i) sp.inner *= s[i];
  return sp;
}

template <typename T>
void max_reduce(const T* in, const AxisSplit& sp, T* out) {
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t i = 0; i < sp.inner; ++i) {
      T m = in[(o * sp.axis) * sp.inner + i];
      for (std::int64_t a = 1; a < sp.axis; ++a) {
        m = std::max(m, in[(o * sp.axis + a) * sp.inner + i]);
      }
      out[o * sp.inner + i] = m;
    }
  }
}

template <typename T>
void upsample_nearest_2x(const T* in, std::int64_t planes, std::int64_t h, std::int64_t w,
                         T* out) {
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = in + p * h * w;
    T* dst = out + p * 4 * h * w;
    for (std::int64_t y = 0; y < 2 * h; ++y) {
      for (std::int64_t x = 0; x < 2 * w; ++x) {
        dst[y * 2 * w + x] = src[(y / 2) * w + (x / 2)];
      }
    }
  }
}

// ---- int8 helpers ----

inline std::int8_t requantize_scalar(std::int32_t q, float multiplier) {
  const float v = static_cast<float>(q) * multiplier;
  const double r = round_half_to_even(static_cast<double>(v));
  const double c = std::clamp(r, static_cast<double>(QuantParams::kQMin),
                              static_cast<double>(QuantParams::kQMax));
  return static_cast<std::int8_t>(c);
}

inline std::vector<std::int8_t> requantize_vec(std::span<const std::int8_t> q,
                                               float in_scale, float out_scale) {
  std::vector<std::int8_t> out(q.size());
  if (in_scale == out_scale) {
    std::copy(q.begin(), q.end(), out.begin());
    return out;
  }
  const float m = in_scale / out_scale;
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = requantize_scalar(q[i], m);
  }
  return out;
}

}  // namespace detail

// MAC counts per node: conv2d touches out_elems * in_ch * k^2 pairs, linear
// rows * out * in, reductions their input, everything else its output. These
// counts are the portable runtime proxy; wall-clock is reported but never
// asserted.
struct FlopReport {
  std::vector<std::pair<std::string, std::uint64_t>> per_node;
  std::uint64_t total = 0;
};

inline FlopReport flop_count(const Graph& g, const ShapeTable& input_overrides = {}) {
  const ShapeTable shapes = validate(g, input_overrides);
  FlopReport rep;
  for (const Node& n : g.nodes) {
    const Shape& out = shapes.at(n.output);
    const std::uint64_t out_elems = static_cast<std::uint64_t>(shape_numel(out));
    std::uint64_t macs = 0;
    switch (n.kind) {
      case OpKind::kConv2d: {
        const Shape& in = shapes.at(n.inputs[0]);
        const std::int64_t in_ch = in[in.size() == 4 ? 1 : 0];
        macs = out_elems * static_cast<std::uint64_t>(in_ch) *
               static_cast<std::uint64_t>(n.kernel) * static_cast<std::uint64_t>(n.kernel);
        break;
      }
      case OpKind::kLinear: {
        const Shape& in = shapes.at(n.inputs[0]);
        macs = static_cast<std::uint64_t>(shape_numel(in) / in.back()) *
               static_cast<std::uint64_t>(n.out_features) *
               static_cast<std::uint64_t>(in.back());
        break;
      }
      case OpKind::kMaxReduce:
        macs = static_cast<std::uint64_t>(shape_numel(shapes.at(n.inputs[0])));
        break;
      default:
        macs = out_elems;
        break;
    }
    rep.per_node.emplace_back(n.output, macs);
    rep.total += macs;
  }
  return rep;
}

// Executes a validated graph at one precision. Construction pre-bakes the
// precision-specific constants (f16-rounded copies, quantized weights and
// 32-bit biases), so per-frame runs measure steady-state work only. The
// graph must outlive the executor. One executor may run concurrently from
// several threads; every run uses private activation storage.
class Executor {
 public:
  Executor(const Graph& g, Precision precision, const CalibrationTable* calib = nullptr)
      : graph_(&g), precision_(precision), calib_(calib) {
    validate(g);
    if (precision_ == Precision::kI8) {
      if (calib_ == nullptr) {
        throw std::runtime_error("execute: i8 precision requires a calibration table");
      }
      prepare_i8();
    } else if (precision_ == Precision::kF16) {
      for (const auto& [name, c] : g.constants) {
        if (c.dtype() != DType::kI8) f16_constants_[name] = to_f16(c);
      }
    }
  }

  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& inputs) const {
    std::map<std::string, Tensor> all;
    run_internal(inputs, &all);
    return collect_outputs(all);
  }

  // F32 only: returns every edge value (graph inputs and node outputs),
  // which is what activation calibration consumes.
  std::map<std::string, Tensor> run_all_edges(const std::map<std::string, Tensor>& inputs) const {
    if (precision_ != Precision::kF32) {
      throw std::logic_error("run_all_edges requires f32 precision");
    }
    std::map<std::string, Tensor> all;
    run_internal(inputs, &all);
    return all;
  }

 private:
  std::map<std::string, Tensor> collect_outputs(const std::map<std::string, Tensor>& all) const {
    std::map<std::string, Tensor> out;
    for (const auto& name : graph_->outputs) out[name] = all.at(name);
    return out;
  }

  // ---- common driver ----

  void run_internal(const std::map<std::string, Tensor>& inputs,
                    std::map<std::string, Tensor>* sink) const;

  Tensor run_node_i8(const Node& n, const ShapeTable& shapes,
                     const std::map<std::string, Tensor>& staged) const;

  void prepare_i8();

  const Graph* graph_;
  Precision precision_;
  const CalibrationTable* calib_;

  // f16 mode: constants rounded once.
  std::map<std::string, Tensor> f16_constants_;

  // i8 mode: statically inferred per-edge scales, quantized weights, and
  // biases pre-scaled into the 32-bit accumulator domain.
  std::map<std::string, float> edge_scale_;
  std::map<std::string, Tensor> i8_weights_;              // keyed by node output
  std::map<std::string, std::vector<std::int32_t>> i8_biases_;  // keyed by node output
};

inline void Executor::prepare_i8() {
  const Graph& g = *graph_;
  // Every activation edge and every matmul weight must be calibrated.
  for (const auto& in : g.inputs) edge_scale_[in.name] = calib_->params(in.name).scale;
  for (const Node& n : g.nodes) {
    float out_scale = 0.0f;
    switch (n.kind) {
      case OpKind::kConv2d:
      case OpKind::kLinear: {
        const float w_scale = calib_->params(n.weight).scale;
        const float in_scale = edge_scale_.at(n.inputs[0]);
        out_scale = calib_->params(n.output).scale;
        const Tensor& w = g.constants.at(n.weight);
        if (w.dtype() == DType::kI8) {
          throw std::runtime_error("execute: i8 mode expects float weight constants");
        }
        QuantParams qp;
        qp.scale = w_scale;
        i8_weights_[n.output] = quantize(
            w.dtype() == DType::kF32 ? w : Tensor::f32(w.shape(), {w.fdata().begin(), w.fdata().end()}),
            qp);
        if (!n.bias.empty()) {
          const Tensor& b = g.constants.at(n.bias);
          std::vector<std::int32_t> bq(static_cast<std::size_t>(b.numel()));
          const double acc_scale = static_cast<double>(in_scale) * w_scale;
          for (std::size_t i = 0; i < bq.size(); ++i) {
            const double r = round_half_to_even(b.fdata()[i] / acc_scale);
            const double c = std::clamp(r, -2147483648.0, 2147483647.0);
            bq[i] = static_cast<std::int32_t>(c);
          }
          i8_biases_[n.output] = std::move(bq);
        }
        break;
      }
      case OpKind::kBatchNormFolded:
        out_scale = calib_->params(n.output).scale;
        break;
      case OpKind::kRelu:
      case OpKind::kMaxReduce:
      case OpKind::kUpsampleNearest2x:
        out_scale = edge_scale_.at(n.inputs[0]);
        break;
      case OpKind::kConcat:
      case OpKind::kAdd: {
        for (const auto& in : n.inputs) {
          out_scale = std::max(out_scale, edge_scale_.at(in));
        }
        break;
      }
    }
    edge_scale_[n.output] = out_scale;
    // Completeness check: the table must cover this edge even when the
    // runtime scale passes through.
    calib_->at(n.output);
  }
}

inline void Executor::run_internal(const std::map<std::string, Tensor>& inputs,
                                   std::map<std::string, Tensor>* sink) const {
  const Graph& g = *graph_;

  // Shapes follow the actual inputs, so one graph serves several resolutions.
  ShapeTable overrides;
  for (const auto& in : g.inputs) {
    auto it = inputs.find(in.name);
    if (it == inputs.end()) {
      throw std::runtime_error("execute: missing input '" + in.name + "'");
    }
    overrides[in.name] = it->second.shape();
  }
  const ShapeTable shapes = validate(g, overrides);

  std::map<std::string, Tensor>& values = *sink;
  const std::set<std::string> output_set(g.outputs.begin(), g.outputs.end());

  // Raw f32 view of a value for float-path consumption.
  auto fview = [&](const Tensor& t) -> std::span<const float> { return t.fdata(); };

  // Seed graph inputs.
  std::map<std::string, Tensor> staged;  // precision-converted working values
  for (const auto& in : g.inputs) {
    const Tensor& t = inputs.at(in.name);
    if (t.dtype() == DType::kI8) {
      throw std::runtime_error("execute: inputs must be float tensors");
    }
    values[in.name] = t;  // raw, for all-edge collection / passthrough outputs
    switch (precision_) {
      case Precision::kF32:
        staged[in.name] = t;
        break;
      case Precision::kF16:
        staged[in.name] = to_f16(t);
        break;
      case Precision::kI8: {
        QuantParams qp;
        qp.scale = edge_scale_.at(in.name);
        staged[in.name] = quantize(t, qp);
        break;
      }
    }
  }

  auto constant_for = [&](const std::string& name) -> const Tensor& {
    if (precision_ == Precision::kF16) {
      auto it = f16_constants_.find(name);
      if (it != f16_constants_.end()) return it->second;
    }
    return g.constants.at(name);
  };

  // Operand lookup for node consumption.
  auto operand = [&](const std::string& name) -> const Tensor& {
    auto it = staged.find(name);
    if (it != staged.end()) return it->second;
    return constant_for(name);
  };

  for (const Node& n : g.nodes) {
    const Shape& out_shape = shapes.at(n.output);
    const std::int64_t out_n = shape_numel(out_shape);
    Tensor result;

    if (precision_ != Precision::kI8) {
      std::vector<float> out(static_cast<std::size_t>(out_n), 0.0f);
      const Tensor& a0 = operand(n.inputs[0]);
      const Shape& s0 = shapes.at(n.inputs[0]);
      switch (n.kind) {
        case OpKind::kConv2d: {
          const bool batched = s0.size() == 4;
          const std::int64_t batch = batched ? s0[0] : 1;
          const std::int64_t in_ch = s0[batched ? 1 : 0];
          const std::int64_t h = s0[batched ? 2 : 1];
          const std::int64_t w = s0[batched ? 3 : 2];
          const std::int64_t oh = out_shape[batched ? 2 : 1];
          const std::int64_t ow = out_shape[batched ? 3 : 2];
          const Tensor& wt = constant_for(n.weight);
          const float* bias = nullptr;
          if (!n.bias.empty()) bias = constant_for(n.bias).fdata().data();
          for (std::int64_t b = 0; b < batch; ++b) {
            detail::conv2d_f32(fview(a0).data() + b * in_ch * h * w, in_ch, h, w,
                               wt.fdata().data(), bias, n, oh, ow,
                               out.data() + b * n.out_channels * oh * ow);
          }
          break;
        }
        case OpKind::kLinear: {
          const std::int64_t in_f = s0.back();
          const std::int64_t rows = shape_numel(s0) / in_f;
          const Tensor& wt = constant_for(n.weight);
          const float* bias = nullptr;
          if (!n.bias.empty()) bias = constant_for(n.bias).fdata().data();
          detail::linear_f32(fview(a0).data(), rows, in_f, wt.fdata().data(), bias,
                             n.out_features, out.data());
          break;
        }
        case OpKind::kRelu: {
          const auto src = fview(a0);
          for (std::int64_t i = 0; i < out_n; ++i) out[i] = std::max(src[i], 0.0f);
          break;
        }
        case OpKind::kBatchNormFolded: {
          const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
          const detail::AxisSplit sp = detail::split_axis(s0, a);
          const auto src = fview(a0);
          const auto scale = constant_for(n.weight).fdata();
          const auto shift = constant_for(n.bias).fdata();
          for (std::int64_t o = 0; o < sp.outer; ++o) {
            for (std::int64_t c = 0; c < sp.axis; ++c) {
              const std::int64_t base = (o * sp.axis + c) * sp.inner;
              for (std::int64_t i = 0; i < sp.inner; ++i) {
                out[base + i] = src[base + i] * scale[c] + shift[c];
              }
            }
          }
          break;
        }
        case OpKind::kMaxReduce: {
          const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
          detail::max_reduce(fview(a0).data(), detail::split_axis(s0, a), out.data());
          break;
        }
        case OpKind::kConcat: {
          const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
          const detail::AxisSplit osp = detail::split_axis(out_shape, a);
          std::int64_t offset = 0;
          for (const auto& in_name : n.inputs) {
            const Shape& si = shapes.at(in_name);
            const detail::AxisSplit isp = detail::split_axis(si, a);
            const auto src = fview(operand(in_name));
            for (std::int64_t o = 0; o < isp.outer; ++o) {
              for (std::int64_t c = 0; c < isp.axis; ++c) {
                const float* s = src.data() + (o * isp.axis + c) * isp.inner;
                float* d = out.data() + (o * osp.axis + offset + c) * osp.inner;
                std::copy(s, s + isp.inner, d);
              }
            }
            offset += isp.axis;
          }
          break;
        }
        case OpKind::kUpsampleNearest2x: {
          const std::int64_t w = s0.back();
          const std::int64_t h = s0[s0.size() - 2];
          const std::int64_t planes = shape_numel(s0) / (h * w);
          detail::upsample_nearest_2x(fview(a0).data(), planes, h, w, out.data());
          break;
        }
        case OpKind::kAdd: {
          const auto a = fview(a0);
          const auto b = fview(operand(n.inputs[1]));
          for (std::int64_t i = 0; i < out_n; ++i) out[i] = a[i] + b[i];
          break;
        }
      }
      result = Tensor::f32(out_shape, std::move(out));
      values[n.output] = result;
      staged[n.output] =
          precision_ == Precision::kF16 ? to_f16(result) : result;
    } else {
      result = run_node_i8(n, shapes, staged);
      staged[n.output] = result;
      if (output_set.count(n.output) != 0) {
        values[n.output] = dequantize(result);
      }
    }
  }

  // Outputs that name constants (anchor tensors) pass through untouched.
  for (const auto& out : g.outputs) {
    if (values.count(out) == 0) {
      auto it = g.constants.find(out);
      if (it != g.constants.end()) values[out] = it->second;
    }
  }
}

inline Tensor Executor::run_node_i8(const Node& n, const ShapeTable& shapes,
                                    const std::map<std::string, Tensor>& staged) const {
  const Shape& out_shape = shapes.at(n.output);
  const std::int64_t out_n = shape_numel(out_shape);
  const float out_scale = edge_scale_.at(n.output);
  QuantParams out_qp;
  out_qp.scale = out_scale;

  const Tensor& a0 = staged.at(n.inputs[0]);
  const Shape& s0 = shapes.at(n.inputs[0]);
  const float in_scale = edge_scale_.at(n.inputs[0]);
  std::vector<std::int8_t> out(static_cast<std::size_t>(out_n), 0);

  switch (n.kind) {
    case OpKind::kConv2d: {
      const bool batched = s0.size() == 4;
      const std::int64_t batch = batched ? s0[0] : 1;
      const std::int64_t in_ch = s0[batched ? 1 : 0];
      const std::int64_t h = s0[batched ? 2 : 1];
      const std::int64_t w = s0[batched ? 3 : 2];
      const std::int64_t oh = out_shape[batched ? 2 : 1];
      const std::int64_t ow = out_shape[batched ? 3 : 2];
      const Tensor& wq = i8_weights_.at(n.output);
      const float mult = in_scale * wq.quant().scale / out_scale;
      const std::int32_t* bias = nullptr;
      auto bit = i8_biases_.find(n.output);
      if (bit != i8_biases_.end()) bias = bit->second.data();
      const std::int64_t kk = n.kernel;
      for (std::int64_t b = 0; b < batch; ++b) {
        const std::int8_t* in = a0.qdata().data() + b * in_ch * h * w;
        std::int8_t* dst = out.data() + b * n.out_channels * oh * ow;
        for (std::int64_t oc = 0; oc < n.out_channels; ++oc) {
          const std::int32_t b0 = bias ? bias[oc] : 0;
          for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              std::int32_t acc = b0;
              const std::int64_t iy0 = oy * n.stride - n.padding;
              const std::int64_t ix0 = ox * n.stride - n.padding;
              for (std::int64_t ic = 0; ic < in_ch; ++ic) {
                const std::int8_t* in_c = in + ic * h * w;
                const std::int8_t* w_c = wq.qdata().data() + ((oc * in_ch + ic) * kk) * kk;
                for (std::int64_t ky = 0; ky < kk; ++ky) {
                  const std::int64_t iy = iy0 + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (std::int64_t kx = 0; kx < kk; ++kx) {
                    const std::int64_t ix = ix0 + kx;
                    if (ix < 0 || ix >= w) continue;
                    acc += static_cast<std::int32_t>(in_c[iy * w + ix]) *
                           static_cast<std::int32_t>(w_c[ky * kk + kx]);
                  }
                }
              }
              dst[(oc * oh + oy) * ow + ox] = detail::requantize_scalar(acc, mult);
            }
          }
        }
      }
      break;
    }
    case OpKind::kLinear: {
      const std::int64_t in_f = s0.back();
      const std::int64_t rows = shape_numel(s0) / in_f;
      const Tensor& wq = i8_weights_.at(n.output);
      const float mult = in_scale * wq.quant().scale / out_scale;
      const std::int32_t* bias = nullptr;
      auto bit = i8_biases_.find(n.output);
      if (bit != i8_biases_.end()) bias = bit->second.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::int8_t* x = a0.qdata().data() + r * in_f;
        for (std::int64_t o = 0; o < n.out_features; ++o) {
          std::int32_t acc = bias ? bias[o] : 0;
          const std::int8_t* wr = wq.qdata().data() + o * in_f;
          for (std::int64_t i = 0; i < in_f; ++i) {
            acc += static_cast<std::int32_t>(x[i]) * static_cast<std::int32_t>(wr[i]);
          }
          out[r * n.out_features + o] = detail::requantize_scalar(acc, mult);
        }
      }
      break;
    }
    case OpKind::kRelu: {
      const auto src = a0.qdata();
      for (std::int64_t i = 0; i < out_n; ++i) {
        out[i] = std::max(src[i], static_cast<std::int8_t>(0));
      }
      break;
    }
    case OpKind::kBatchNormFolded: {
      const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
      const detail::AxisSplit sp = detail::split_axis(s0, a);
      const auto src = a0.qdata();
      const auto scale = graph_->constants.at(n.weight).fdata();
      const auto shift = graph_->constants.at(n.bias).fdata();
      for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t c = 0; c < sp.axis; ++c) {
          const float m1 = in_scale * scale[c] / out_scale;
          const float m2 = shift[c] / out_scale;
          const std::int64_t base = (o * sp.axis + c) * sp.inner;
          for (std::int64_t i = 0; i < sp.inner; ++i) {
            const float v = static_cast<float>(src[base + i]) * m1 + m2;
            const double r = round_half_to_even(static_cast<double>(v));
            out[base + i] = static_cast<std::int8_t>(
                std::clamp(r, static_cast<double>(QuantParams::kQMin),
                           static_cast<double>(QuantParams::kQMax)));
          }
        }
      }
      break;
    }
    case OpKind::kMaxReduce: {
      const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
      detail::max_reduce(a0.qdata().data(), detail::split_axis(s0, a), out.data());
      break;
    }
    case OpKind::kConcat: {
      const int a = detail::normalize_axis(n.axis, static_cast<int>(s0.size()), n.output);
      const detail::AxisSplit osp = detail::split_axis(out_shape, a);
      std::int64_t offset = 0;
      for (const auto& in_name : n.inputs) {
        const Shape& si = shapes.at(in_name);
        const detail::AxisSplit isp = detail::split_axis(si, a);
        const std::vector<std::int8_t> req =
            detail::requantize_vec(staged.at(in_name).qdata(), edge_scale_.at(in_name), out_scale);
        for (std::int64_t o = 0; o < isp.outer; ++o) {
          for (std::int64_t c = 0; c < isp.axis; ++c) {
            const std::int8_t* s = req.data() + (o * isp.axis + c) * isp.inner;
            std::int8_t* d = out.data() + (o * osp.axis + offset + c) * osp.inner;
            std::copy(s, s + isp.inner, d);
          }
        }
        offset += isp.axis;
      }
      break;
    }
    case OpKind::kUpsampleNearest2x: {
      const std::int64_t w = s0.back();
      const std::int64_t h = s0[s0.size() - 2];
      const std::int64_t planes = shape_numel(s0) / (h * w);
      detail::upsample_nearest_2x(a0.qdata().data(), planes, h, w, out.data());
      break;
    }
    case OpKind::kAdd: {
      const std::vector<std::int8_t> qa =
          detail::requantize_vec(a0.qdata(), in_scale, out_scale);
      const std::vector<std::int8_t> qb = detail::requantize_vec(
          staged.at(n.inputs[1]).qdata(), edge_scale_.at(n.inputs[1]), out_scale);
      for (std::int64_t i = 0; i < out_n; ++i) {
        const int s = static_cast<int>(qa[i]) + static_cast<int>(qb[i]);
        out[i] = static_cast<std::int8_t>(
            std::clamp(s, QuantParams::kQMin, QuantParams::kQMax));
      }
      break;
    }
  }
  return Tensor::i8(out_shape, std::move(out), out_qp);
}

inline std::map<std::string, Tensor> execute(const Graph& g,
                                             const std::map<std::string, Tensor>& inputs,
                                             Precision precision,
                                             const CalibrationTable* calib = nullptr) {
  return Executor(g, precision, calib).run(inputs);
}

inline std::map<std::string, Tensor> execute_all_edges(
    const Graph& g, const std::map<std::string, Tensor>& inputs) {
  return Executor(g, Precision::kF32).run_all_edges(inputs);
}

}  // namespace detkit
