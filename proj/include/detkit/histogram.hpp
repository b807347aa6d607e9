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
#include <span>
#include <stdexcept>
#include <vector>

#include "detkit/tensor.hpp"

namespace detkit {

// Histogram over |activation|. Bin i covers [i*bin_width, (i+1)*bin_width);
// a value landing exactly on the top edge of the range is counted in the
// last bin. When a value exceeds the covered range the histogram is rebuilt
// with doubled bin width (counts merged pairwise) until it fits, so
// amax <= num_bins * bin_width holds after every collect.
class ActivationHistogram {
 public:
  explicit ActivationHistogram(int num_bins = 2048, double bin_width = 1.0 / 1024.0)
      : bin_width_(bin_width), counts_(static_cast<std::size_t>(num_bins), 0) {
    if (num_bins <= 0) throw std::invalid_argument("histogram: num_bins must be positive");
    if (!(bin_width > 0.0)) throw std::invalid_argument("histogram: bin_width must be positive");
  }

  void collect(std::span<const float> values) {
    for (float x : values) {
      if (!std::isfinite(x)) {
        ++nonfinite_skipped_;
        continue;
      }
      const double a = std::fabs(static_cast<double>(x));
      while (a > range()) grow();
      std::size_t bin = static_cast<std::size_t>(a / bin_width_);
      if (bin >= counts_.size()) bin = counts_.size() - 1;
      ++counts_[bin];
      ++total_;
      if (a > amax_) amax_ = a;
    }
  }

  void collect(const Tensor& t) {
    if (t.dtype() != DType::kF32) {
      throw std::invalid_argument("histogram: collect expects an f32 tensor");
    }
    collect(t.fdata());
  }

  void merge(const ActivationHistogram& other) {
    if (other.counts_.size() != counts_.size()) {
      throw std::invalid_argument("histogram: merge requires equal bin counts");
    }
    if (other.total_ == 0 && other.nonfinite_skipped_ == 0) return;
    ActivationHistogram o = other;
    // Reconcile resolutions by doubling the finer histogram.
    while (bin_width_ < o.bin_width_ && !nearly_equal(bin_width_, o.bin_width_)) grow();
    while (o.bin_width_ < bin_width_ && !nearly_equal(bin_width_, o.bin_width_)) o.grow();
    if (!nearly_equal(bin_width_, o.bin_width_)) {
      throw std::invalid_argument("histogram: incompatible bin widths (not a power-of-two ratio)");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    total_ += o.total_;
    nonfinite_skipped_ += o.nonfinite_skipped_;
    if (o.amax_ > amax_) amax_ = o.amax_;
  }

  static ActivationHistogram merged(const ActivationHistogram& a, const ActivationHistogram& b) {
    ActivationHistogram out = a;
    out.merge(b);
    return out;
  }

  int num_bins() const { return static_cast<int>(counts_.size()); }
  double bin_width() const { return bin_width_; }
  double range() const { return bin_width_ * static_cast<double>(counts_.size()); }
  std::span<const std::uint64_t> counts() const { return counts_; }
  double amax() const { return amax_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t nonfinite_skipped() const { return nonfinite_skipped_; }

 private:
  static bool nearly_equal(double a, double b) {
    return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
  }

  void grow() {
    const std::size_t nb = counts_.size();
    std::vector<std::uint64_t> merged(nb, 0);
    for (std::size_t i = 0; i < nb / 2; ++i) {
      merged[i] = counts_[2 * i] + (2 * i + 1 < nb ? counts_[2 * i + 1] : 0);
    }
    counts_ = std::move(merged);
    bin_width_ *= 2.0;
  }

  double bin_width_;
  std::vector<std::uint64_t> counts_;
  double amax_ = 0.0;
  std::uint64_t total_ = 0;
  std::uint64_t nonfinite_skipped_ = 0;
};

}  // namespace detkit
