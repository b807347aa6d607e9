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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/tensor.hpp"

namespace detkit {

// ETF tensor file: "ETF1" magic, u8 dtype code (0=f32, 1=f16, 2=i8), u8 rank,
// rank x u32 little-endian dims, then the row-major payload. f32 elements are
// 4-byte LE, f16 2-byte LE, i8 one byte each followed by a single LE f32
// quantization scale.

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xffu));
  out.push_back(static_cast<char>((v >> 8) & 0xffu));
  out.push_back(static_cast<char>((v >> 16) & 0xffu));
  out.push_back(static_cast<char>((v >> 24) & 0xffu));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xffu));
  out.push_back(static_cast<char>((v >> 8) & 0xffu));
}

inline void put_f32le(std::string& out, float f) {
  put_u32le(out, std::bit_cast<std::uint32_t>(f));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16le() {
    need(2);
    const auto b0 = static_cast<std::uint8_t>(bytes_[pos_]);
    const auto b1 = static_cast<std::uint8_t>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(b0 | (b1 << 8));
  }
  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }
  float f32le() { return std::bit_cast<float>(u32le()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error("etf: truncated file: " + path_);
    }
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string etf_encode(const Tensor& t) {
  if (t.rank() > 255) throw std::invalid_argument("etf: rank exceeds u8");
  std::string out = "ETF1";
  out.push_back(static_cast<char>(static_cast<std::uint8_t>(t.dtype())));
  out.push_back(static_cast<char>(static_cast<std::uint8_t>(t.rank())));
  for (std::int64_t d : t.shape()) {
    detail::put_u32le(out, static_cast<std::uint32_t>(d));
  }
  switch (t.dtype()) {
    case DType::kF32:
      for (float f : t.fdata()) detail::put_f32le(out, f);
      break;
    case DType::kF16:
      for (float f : t.fdata()) detail::put_u16le(out, f32_to_f16_bits(f));
      break;
    case DType::kI8:
      for (std::int8_t q : t.qdata()) out.push_back(static_cast<char>(q));
      detail::put_f32le(out, t.quant().scale);
      break;
  }
  return out;
}

inline Tensor etf_decode(const std::string& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < 6 || bytes.compare(0, 4, "ETF1") != 0) {
    throw std::runtime_error("etf: bad magic in " + path);
  }
  detail::ByteReader r(bytes, path);
  r.u32le();  // magic, already checked
  const std::uint8_t code = r.u8();
  if (code > 2) throw std::runtime_error("etf: unknown dtype code in " + path);
  const DType dtype = static_cast<DType>(code);
  const int rank = r.u8();
  std::vector<std::int64_t> shape(rank);
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t d = r.u32le();
    if (d == 0) throw std::runtime_error("etf: zero dimension in " + path);
    shape[i] = static_cast<std::int64_t>(d);
  }
  const std::int64_t n = shape_numel(shape);
  switch (dtype) {
    case DType::kF32: {
      std::vector<float> data(static_cast<std::size_t>(n));
      for (auto& f : data) f = r.f32le();
      return Tensor::f32(std::move(shape), std::move(data));
    }
    case DType::kF16: {
      std::vector<float> data(static_cast<std::size_t>(n));
      for (auto& f : data) f = f16_bits_to_f32(r.u16le());
      return Tensor::f16_unchecked(std::move(shape), std::move(data));
    }
    case DType::kI8: {
      std::vector<std::int8_t> data(static_cast<std::size_t>(n));
      for (auto& q : data) q = static_cast<std::int8_t>(r.u8());
      QuantParams qp;
      qp.scale = r.f32le();
      if (!(qp.scale > 0.0f)) {
        throw std::runtime_error("etf: non-positive i8 scale in " + path);
      }
      return Tensor::i8(std::move(shape), std::move(data), qp);
    }
  }
  throw std::runtime_error("etf: unreachable");
}

inline void write_etf(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("etf: cannot open for write: " + path);
  const std::string bytes = etf_encode(t);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("etf: write failed: " + path);
}

inline Tensor read_etf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("etf: cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return etf_decode(bytes, path);
}

}  // namespace detkit
