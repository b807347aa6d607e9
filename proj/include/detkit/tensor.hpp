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
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/float16.hpp"

namespace detkit {

enum class DType : std::uint8_t { kF32 = 0, kF16 = 1, kI8 = 2 };

inline const char* dtype_name(DType d) {
  switch (d) {
    case DType::kF32: return "f32";
    case DType::kF16: return "f16";
    case DType::kI8: return "i8";
  }
  return "?";
}

// Symmetric per-tensor quantization: zero point is always 0 and the integer
// range is [-127, 127].
struct QuantParams {
  float scale = 1.0f;  // real units per integer step

  static constexpr int kQMin = -127;
  static constexpr int kQMax = 127;
};

inline std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

// Dense row-major n-dimensional array. Immutable after construction; shared
// reads from any thread are safe.
class Tensor {
 public:
  Tensor() = default;

  static Tensor f32(std::vector<std::int64_t> shape, std::vector<float> data) {
    check_shape(shape, static_cast<std::int64_t>(data.size()));
    Tensor t;
    t.dtype_ = DType::kF32;
    t.shape_ = std::move(shape);
    t.fdata_ = std::move(data);
    return t;
  }

  static Tensor zeros_f32(std::vector<std::int64_t> shape) {
    const std::int64_t n = shape_numel(shape);
    return f32(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
  }

  // Values must already be exactly representable in binary16.
  static Tensor f16(std::vector<std::int64_t> shape, std::vector<float> data) {
    check_shape(shape, static_cast<std::int64_t>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float r = f16_round(data[i]);
      const bool same = (r == data[i]) || (std::isnan(r) && std::isnan(data[i]));
      if (!same) {
        throw std::invalid_argument("Tensor::f16: value at index " + std::to_string(i) +
                                    " is not representable in binary16");
      }
    }
    Tensor t;
    t.dtype_ = DType::kF16;
    t.shape_ = std::move(shape);
    t.fdata_ = std::move(data);
    return t;
  }

  // Caller guarantees every value is binary16-representable (e.g. output of
  // f16_round or decoded from binary16 bits).
  static Tensor f16_unchecked(std::vector<std::int64_t> shape, std::vector<float> data) {
    check_shape(shape, static_cast<std::int64_t>(data.size()));
    Tensor t;
    t.dtype_ = DType::kF16;
    t.shape_ = std::move(shape);
    t.fdata_ = std::move(data);
    return t;
  }

  static Tensor i8(std::vector<std::int64_t> shape, std::vector<std::int8_t> data,
                   QuantParams qp) {
    check_shape(shape, static_cast<std::int64_t>(data.size()));
    if (!(qp.scale > 0.0f)) {
      throw std::invalid_argument("Tensor::i8: scale must be positive");
    }
    Tensor t;
    t.dtype_ = DType::kI8;
    t.shape_ = std::move(shape);
    t.qdata_ = std::move(data);
    t.qp_ = qp;
    return t;
  }

  DType dtype() const { return dtype_; }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t numel() const { return shape_numel(shape_); }
  int rank() const { return static_cast<int>(shape_.size()); }

  std::span<const float> fdata() const {
    if (dtype_ == DType::kI8) throw std::logic_error("Tensor::fdata on i8 tensor");
    return fdata_;
  }
  std::span<const std::int8_t> qdata() const {
    if (dtype_ != DType::kI8) throw std::logic_error("Tensor::qdata on float tensor");
    return qdata_;
  }
  const QuantParams& quant() const {
    if (dtype_ != DType::kI8) throw std::logic_error("Tensor::quant on float tensor");
    return qp_;
  }

  bool same_values(const Tensor& o) const {
    return dtype_ == o.dtype_ && shape_ == o.shape_ && fdata_ == o.fdata_ &&
           qdata_ == o.qdata_ && (dtype_ != DType::kI8 || qp_.scale == o.qp_.scale);
  }

 private:
  static void check_shape(const std::vector<std::int64_t>& shape, std::int64_t data_len) {
    for (std::int64_t d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
    }
    if (shape_numel(shape) != data_len) {
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_len) +
                                  " does not match shape " + shape_str(shape));
    }
  }

  DType dtype_ = DType::kF32;
  std::vector<std::int64_t> shape_;
  std::vector<float> fdata_;        // F32 / F16 payload
  std::vector<std::int8_t> qdata_;  // I8 payload
  QuantParams qp_;
};

inline std::int8_t quantize_scalar(float x, float scale) {
  const double q = round_half_to_even(static_cast<double>(x) / static_cast<double>(scale));
  const double c = std::clamp(q, static_cast<double>(QuantParams::kQMin),
                              static_cast<double>(QuantParams::kQMax));
  return static_cast<std::int8_t>(c);
}

inline Tensor quantize(const Tensor& t, QuantParams qp) {
  if (t.dtype() != DType::kF32) {
    throw std::invalid_argument("quantize: expected f32 input, got " +
                                std::string(dtype_name(t.dtype())));
  }
  if (!(qp.scale > 0.0f)) throw std::invalid_argument("quantize: scale must be positive");
  const auto src = t.fdata();
  std::vector<std::int8_t> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!std::isfinite(src[i])) {
      throw std::runtime_error("quantize: non-finite value at index " + std::to_string(i));
    }
    out[i] = quantize_scalar(src[i], qp.scale);
  }
  return Tensor::i8(t.shape(), std::move(out), qp);
}

inline Tensor dequantize(const Tensor& t) {
  if (t.dtype() != DType::kI8) {
    throw std::invalid_argument("dequantize: expected i8 input, got " +
                                std::string(dtype_name(t.dtype())));
  }
  const auto src = t.qdata();
  const float scale = t.quant().scale;
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = static_cast<float>(src[i]) * scale;
  }
  return Tensor::f32(t.shape(), std::move(out));
}

inline Tensor to_f16(const Tensor& t) {
  if (t.dtype() == DType::kI8) {
    throw std::invalid_argument("to_f16: expected float input, got i8");
  }
  const auto src = t.fdata();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f16_round(src[i]);
  return Tensor::f16_unchecked(t.shape(), std::move(out));
}

}  // namespace detkit
