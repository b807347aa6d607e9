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
#include <cmath>
#include <cstdint>

namespace detkit {

// IEEE 754 binary16 emulation on top of binary32. Conversion rounds to
// nearest, ties to even; values beyond the binary16 range become +-inf.

inline std::uint16_t f32_to_f16_bits(float x) {
  const std::uint32_t b = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t sign = (b >> 16) & 0x8000u;
  const std::uint32_t exp32 = (b >> 23) & 0xffu;
  const std::uint32_t man32 = b & 0x7fffffu;

  if (exp32 == 0xffu) {  // inf / nan
    if (man32 == 0) return static_cast<std::uint16_t>(sign | 0x7c00u);
    std::uint32_t man16 = man32 >> 13;
    if (man16 == 0) man16 = 1;  // keep nan a nan
    return static_cast<std::uint16_t>(sign | 0x7c00u | man16);
  }

  const int e = static_cast<int>(exp32) - 127 + 15;
  if (e >= 0x1f) {  // overflow
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  if (e <= 0) {  // subnormal range of binary16 (or underflow to zero)
    if (e < -10) return static_cast<std::uint16_t>(sign);
    const std::uint32_t full = man32 | 0x800000u;  // implicit leading one
    const int shift = 14 - e;                      // in [14, 24]
    std::uint32_t man16 = full >> shift;
    const std::uint32_t rem = full & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (man16 & 1u))) ++man16;
    // A carry out of the mantissa lands exactly on the smallest normal.
    return static_cast<std::uint16_t>(sign | man16);
  }

  std::uint16_t h = static_cast<std::uint16_t>(
      sign | (static_cast<std::uint32_t>(e) << 10) | (man32 >> 13));
  const std::uint32_t rem = man32 & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) {
    ++h;  // mantissa carry may bump the exponent; 65520 -> inf is correct
  }
  return h;
}

inline float f16_bits_to_f32(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp16 = (h >> 10) & 0x1fu;
  const std::uint32_t man16 = h & 0x3ffu;

  if (exp16 == 0x1fu) {  // inf / nan
    const std::uint32_t out = sign | 0x7f800000u | (man16 << 13);
    return std::bit_cast<float>(out);
  }
  if (exp16 == 0) {
    if (man16 == 0) return std::bit_cast<float>(sign);
    // Subnormal: man16 * 2^-24, exact in binary32.
    const float v = static_cast<float>(man16) * 0x1p-24f;
    return (sign != 0) ? -v : v;
  }
  const std::uint32_t out =
      sign | ((exp16 - 15 + 127) << 23) | (man16 << 13);
  return std::bit_cast<float>(out);
}

// Round-trip through binary16: the nearest value representable in half
// precision, as a float.
inline float f16_round(float x) { return f16_bits_to_f32(f32_to_f16_bits(x)); }

// Deterministic round-half-to-even, independent of the FP environment.
inline double round_half_to_even(double v) {
  const double fl = std::floor(v);
  const double diff = v - fl;
  if (diff > 0.5) return fl + 1.0;
  if (diff < 0.5) return fl;
  return (std::fmod(fl, 2.0) == 0.0) ? fl : fl + 1.0;
}

}  // namespace detkit
