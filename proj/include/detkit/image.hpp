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
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/tensor.hpp"

namespace detkit {

// 8-bit RGB image, row-major, channel-interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int y, int x, int c) const {
    return data[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

inline Image make_image(int height, int width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("image: bad dimensions");
  Image img;
  img.height = height;
  img.width = width;
  img.data.assign(static_cast<std::size_t>(height) * width * 3, 0);
  return img;
}

// ---- binary PPM (P6) ----

inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ppm: cannot open for write: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (!f) throw std::runtime_error("ppm: write failed: " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("ppm: cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("ppm: not a P6 file: " + path);
  auto next_int = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    for (;;) {
      const int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    int v = -1;
    f >> v;
    if (!f || v < 0) throw std::runtime_error("ppm: bad header in " + path);
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 is supported: " + path);
  f.get();  // single whitespace after maxval
  Image img = make_image(h, w);
  f.read(reinterpret_cast<char*>(img.data.data()),
         static_cast<std::streamsize>(img.data.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw std::runtime_error("ppm: truncated pixel data in " + path);
  }
  return img;
}

// Bilinear resize with half-pixel-centered sampling; output channels are
// rounded half-to-even back to u8.
inline Image resize_bilinear(const Image& img, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1) throw std::invalid_argument("resize: bad target");
  if (target_h == img.height && target_w == img.width) return img;
  Image out = make_image(target_h, target_w);
  const double sy = static_cast<double>(img.height) / target_h;
  const double sx = static_cast<double>(img.width) / target_w;
  for (int y = 0; y < target_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    const double fy = std::clamp(src_y, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const double fx = std::clamp(src_x, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v00 = img.at(y0, x0, c);
        const double v01 = img.at(y0, x1, c);
        const double v10 = img.at(y1, x0, c);
        const double v11 = img.at(y1, x1, c);
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        const double v = top + (bot - top) * wy;
        const double r = std::clamp(round_half_to_even(v), 0.0, 255.0);
        out.data[static_cast<std::size_t>((y * target_w + x) * 3 + c)] =
            static_cast<std::uint8_t>(r);
      }
    }
  }
  return out;
}

struct PreprocConfig {
  int target_h = 576;
  int target_w = 1024;
  // ImageNet RGB statistics in [0,1] units; the backbone family this
  // pipeline mirrors is pre-trained with them.
  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev = {0.229f, 0.224f, 0.225f};
};

// u8 interleaved -> normalized channel-planar f32: y = (u8/255 - mean)/std.
inline Tensor normalize(const Image& img, const PreprocConfig& cfg) {
  for (float s : cfg.stddev) {
    if (!(s > 0.0f)) throw std::invalid_argument("normalize: stddev must be positive");
  }
  const std::int64_t hw = static_cast<std::int64_t>(img.height) * img.width;
  std::vector<float> out(static_cast<std::size_t>(3 * hw));
  for (int c = 0; c < 3; ++c) {
    const float m = cfg.mean[static_cast<std::size_t>(c)];
    const float s = cfg.stddev[static_cast<std::size_t>(c)];
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const float u = static_cast<float>(img.at(y, x, c)) / 255.0f;
        out[static_cast<std::size_t>(c * hw + y * img.width + x)] = (u - m) / s;
      }
    }
  }
  return Tensor::f32({3, img.height, img.width}, std::move(out));
}

// The pipeline order is fixed: resize first, then normalize.
inline Tensor preprocess(const Image& img, const PreprocConfig& cfg) {
  return normalize(resize_bilinear(img, cfg.target_h, cfg.target_w), cfg);
}

}  // namespace detkit
