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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "detkit/calibration.hpp"
#include "detkit/histogram.hpp"
#include "test_util.hpp"

using namespace detkit;

namespace {

// Brute-force KL threshold search, recomputing P and Q from scratch for
// every candidate. Independent of the library implementation.
struct OracleResult {
  int index = -1;
  double kl = 0.0;
};

OracleResult entropy_threshold_oracle(std::span<const std::uint64_t> counts) {
  const int num_bins = static_cast<int>(counts.size());
  constexpr int kLevels = 128;
  OracleResult best;
  for (int i = kLevels; i <= num_bins; ++i) {
    std::vector<double> p(i, 0.0), q(i, 0.0);
    for (int b = 0; b < i; ++b) p[b] = static_cast<double>(counts[b]);
    for (int b = i; b < num_bins; ++b) p[i - 1] += static_cast<double>(counts[b]);

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
        if (counts[b] != 0 && nonzero > 0) q[b] = mass / nonzero;
      }
    }

    double p_sum = 0.0, q_sum = 0.0;
    for (int b = 0; b < i; ++b) p_sum += p[b];
    for (int b = 0; b < i; ++b) q_sum += q[b];
    for (int b = 0; b < i; ++b) {
      if (p[b] > 0.0 && q[b] == 0.0) {
        q[b] = 1e-10;
        q_sum += 1e-10;
      }
    }
    if (!(p_sum > 0.0) || !(q_sum > 0.0)) continue;

    double kl = 0.0;
    for (int b = 0; b < i; ++b) {
      if (p[b] == 0.0) continue;
      const double pn = p[b] / p_sum;
      const double qn = q[b] / q_sum;
      kl += pn * std::log(pn / qn);
    }
    if (best.index < 0 || kl < best.kl) {
      best.index = i;
      best.kl = kl;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("collect bins absolute values") {
  ActivationHistogram h(2048, 1.0);
  h.collect(Tensor::f32({2}, {0.5f, -0.5f}));
  CHECK(h.counts()[0] == 2);
  CHECK(h.amax() == 0.5);
  CHECK(h.total() == 2);
}

TEST_CASE("collecting the same tensor twice doubles every count") {
  const Tensor t = test::random_f32({500}, -2.0f, 2.0f, 0x5EED);
  ActivationHistogram once(256, 0.01);
  once.collect(t);
  ActivationHistogram twice = once;
  twice.collect(t);
  for (int i = 0; i < once.num_bins(); ++i) {
    CHECK(twice.counts()[i] == 2 * once.counts()[i]);
  }
  CHECK(twice.total() == 2 * once.total());
}

TEST_CASE("collect skips non-finite values into a diagnostic") {
  ActivationHistogram h(256, 0.1);
  h.collect(Tensor::f32({3}, {1.0f, std::numeric_limits<float>::quiet_NaN(),
                              -std::numeric_limits<float>::infinity()}));
  CHECK(h.total() == 1);
  CHECK(h.nonfinite_skipped() == 2);
}

TEST_CASE("range doubling keeps amax within the covered range") {
  ActivationHistogram h(256, 0.001);
  h.collect(Tensor::f32({3}, {0.1f, 10.0f, 100.0f}));
  CHECK(h.amax() == Catch::Approx(100.0));
  CHECK(h.amax() <= h.range());
  CHECK(h.total() == 3);
  std::uint64_t sum = 0;
  for (auto c : h.counts()) sum += c;
  CHECK(sum == 3);
}

TEST_CASE("sample statistics survive collection") {
  const auto xs = test::random_normal(100000, 0.0f, 1.0f, 0xAB5);
  ActivationHistogram h(2048, 5.0 / 2048.0);
  h.collect(Tensor::f32({100000}, xs));
  CHECK(h.total() == 100000);

  double sample_mean = 0.0;
  for (float x : xs) sample_mean += std::fabs(x);
  sample_mean /= static_cast<double>(xs.size());

  double binned_mean = 0.0;
  for (int i = 0; i < h.num_bins(); ++i) {
    binned_mean += static_cast<double>(h.counts()[i]) * (i + 0.5) * h.bin_width();
  }
  binned_mean /= static_cast<double>(h.total());
  CHECK(std::fabs(binned_mean - sample_mean) < 0.02);
}

TEST_CASE("merge identity and commutativity") {
  ActivationHistogram h(512, 0.01);
  h.collect(test::random_f32({1000}, -3.0f, 3.0f, 0x111));
  ActivationHistogram empty(512, 0.01);

  ActivationHistogram m = ActivationHistogram::merged(h, empty);
  for (int i = 0; i < h.num_bins(); ++i) CHECK(m.counts()[i] == h.counts()[i]);
  CHECK(m.amax() == h.amax());
  CHECK(m.total() == h.total());

  ActivationHistogram a(512, 0.01), b(512, 0.01);
  a.collect(test::random_f32({700}, -1.0f, 1.0f, 0x222));
  b.collect(test::random_f32({300}, -2.0f, 2.0f, 0x333));
  const ActivationHistogram ab = ActivationHistogram::merged(a, b);
  const ActivationHistogram ba = ActivationHistogram::merged(b, a);
  for (int i = 0; i < ab.num_bins(); ++i) CHECK(ab.counts()[i] == ba.counts()[i]);
  CHECK(ab.amax() == ba.amax());
}

TEST_CASE("merge of two shards equals one pass over the whole set") {
  const auto xs = test::random_normal(20000, 0.0f, 2.0f, 0x444);
  ActivationHistogram whole(1024, 0.005);
  whole.collect(Tensor::f32({20000}, xs));

  ActivationHistogram lo(1024, 0.005), hi(1024, 0.005);
  lo.collect(std::span<const float>(xs.data(), 10000));
  hi.collect(std::span<const float>(xs.data() + 10000, 10000));
  const ActivationHistogram m = ActivationHistogram::merged(lo, hi);

  for (int i = 0; i < whole.num_bins(); ++i) CHECK(m.counts()[i] == whole.counts()[i]);
  CHECK(m.amax() == whole.amax());
  CHECK(m.total() == whole.total());
}

TEST_CASE("merge reconciles power-of-two bin widths and rejects others") {
  ActivationHistogram fine(256, 0.01), coarse(256, 0.04);
  fine.collect(Tensor::f32({1}, {0.5f}));
  coarse.collect(Tensor::f32({1}, {1.5f}));
  const ActivationHistogram m = ActivationHistogram::merged(fine, coarse);
  CHECK(m.bin_width() == Catch::Approx(0.04));
  CHECK(m.total() == 2);

  ActivationHistogram odd(256, 0.03);
  odd.collect(Tensor::f32({1}, {0.5f}));
  ActivationHistogram base(256, 0.01);
  base.collect(Tensor::f32({1}, {0.5f}));
  CHECK_THROWS_AS(ActivationHistogram::merged(base, odd), std::invalid_argument);
}

TEST_CASE("minmax calibration is amax/127") {
  ActivationHistogram h(2048, 12.7 / 2048.0);
  h.collect(Tensor::f32({2}, {12.7f, -1.0f}));
  CHECK(calibrate_minmax(h).scale == Catch::Approx(0.1).epsilon(1e-6));

  ActivationHistogram h2(2048, 127.0 / 2048.0);
  h2.collect(Tensor::f32({1}, {127.0f}));
  CHECK(calibrate_minmax(h2).scale == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("minmax never saturates observed values except amax") {
  const auto xs = test::random_uniform(4000, -7.3f, 7.3f, 0x777);
  ActivationHistogram h(2048, 0.004);
  h.collect(Tensor::f32({4000}, xs));
  const QuantParams qp = calibrate_minmax(h);
  for (float x : xs) {
    const int q = quantize_scalar(x, qp.scale);
    if (std::fabs(x) < static_cast<float>(h.amax())) {
      // Interior values may round to 127 only from within half a step.
      if (std::abs(q) == 127) {
        CHECK(std::fabs(x) >= 126.5f * qp.scale);
      }
    }
  }
}

TEST_CASE("calibrators reject empty histograms") {
  ActivationHistogram empty(2048, 0.01);
  CHECK_THROWS_WITH(calibrate_minmax(empty), Catch::Matchers::ContainsSubstring("no calibration data"));
  CHECK_THROWS_WITH(calibrate_entropy(empty), Catch::Matchers::ContainsSubstring("no calibration data"));
  ActivationHistogram zeros(2048, 0.01);
  zeros.collect(Tensor::f32({4}, {0.0f, 0.0f, 0.0f, 0.0f}));
  CHECK_THROWS_AS(calibrate_minmax(zeros), std::runtime_error);
}

TEST_CASE("entropy keeps the full range when all mass is below 128 bins") {
  ActivationHistogram h(2048, 0.01);
  const auto xs = test::random_uniform(5000, -1.27f, 1.27f, 0x888);
  h.collect(Tensor::f32({5000}, xs));
  REQUIRE(h.amax() < 128 * h.bin_width());
  const EntropyResult r = calibrate_entropy_detail(h);
  CHECK(r.threshold_index == 128);
  // No clipping beyond the observed range: the scale equals minmax.
  CHECK(r.params.scale == calibrate_minmax(h).scale);
}

TEST_CASE("entropy threshold matches the brute-force oracle") {
  const std::uint64_t seeds[] = {0x1001, 0x1002, 0x1003, 0x1004};
  for (std::uint64_t seed : seeds) {
    ActivationHistogram h(2048, 4.2 / 2048.0);
    h.collect(Tensor::f32({100000}, test::random_normal(100000, 0.0f, 1.0f, seed)));
    const EntropyResult got = calibrate_entropy_detail(h);
    const OracleResult want = entropy_threshold_oracle(h.counts());
    CAPTURE(seed);
    CHECK(got.threshold_index == want.index);
  }
}

TEST_CASE("entropy clips harder than minmax on heavy-tailed data") {
  auto xs = test::random_normal(10000, 0.0f, 1.0f, 0x999);
  // 0.1% outliers at 100 sigma.
  std::mt19937_64 rng(0x99A);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  for (int i = 0; i < 10; ++i) xs[pick(rng)] = 100.0f;
  ActivationHistogram h(2048, 101.0 / 2048.0);
  h.collect(Tensor::f32({10000}, xs));
  const float entropy_scale = calibrate_entropy(h).scale;
  const float minmax_scale = calibrate_minmax(h).scale;
  CHECK(entropy_scale < minmax_scale);
}

TEST_CASE("entropy scale never exceeds minmax scale") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    ActivationHistogram h(2048, 0.002 * static_cast<double>(seed));
    h.collect(Tensor::f32({20000}, test::random_normal(20000, 0.0f, 0.8f, seed)));
    CHECK(calibrate_entropy(h).scale <= calibrate_minmax(h).scale + 1e-9f);
  }
}

TEST_CASE("KL is non-negative and zero for group-constant histograms") {
  // Uniform counts in bins [0, 128): every candidate grouping reproduces the
  // distribution exactly, so all KLs are 0 and the tie breaks to i = 128.
  ActivationHistogram h(2048, 0.01);
  std::vector<float> xs;
  for (int rep = 0; rep < 3; ++rep) {
    for (int b = 0; b < 128; ++b) {
      xs.push_back(static_cast<float>((b + 0.5) * 0.01));
    }
  }
  h.collect(Tensor::f32({static_cast<std::int64_t>(xs.size())}, xs));
  const EntropyResult r = calibrate_entropy_detail(h);
  CHECK(r.kl_divergence == 0.0);
  CHECK(r.threshold_index == 128);

  // One count in every bin: any clipped candidate folds tail mass onto the
  // last bin and pays for it, so only the full range is lossless.
  ActivationHistogram full(2048, 0.01);
  std::vector<float> ys;
  for (int b = 0; b < 2048; ++b) ys.push_back(static_cast<float>((b + 0.5) * 0.01));
  full.collect(Tensor::f32({2048}, ys));
  const EntropyResult rf = calibrate_entropy_detail(full);
  CHECK(rf.kl_divergence == 0.0);
  CHECK(rf.threshold_index == 2048);

  // Random histograms: KL of the winner is always >= 0.
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    ActivationHistogram g(512, 0.01);
    g.collect(test::random_f32({30000}, -4.0f, 4.0f, seed));
    CHECK(calibrate_entropy_detail(g).kl_divergence >= 0.0);
  }
}

TEST_CASE("calibrators are scale-equivariant") {
  const auto xs = test::random_normal(50000, 0.0f, 1.0f, 0xEE1);
  // Power-of-two factor so the scaled samples land in identical bins.
  const float c = 4.0f;
  std::vector<float> scaled(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) scaled[i] = c * xs[i];

  ActivationHistogram h1(2048, 5.0 / 2048.0);
  h1.collect(Tensor::f32({50000}, xs));
  ActivationHistogram h2(2048, c * 5.0 / 2048.0);
  h2.collect(Tensor::f32({50000}, scaled));

  CHECK(calibrate_minmax(h2).scale ==
        Catch::Approx(c * calibrate_minmax(h1).scale).epsilon(1e-5));
  const EntropyResult r1 = calibrate_entropy_detail(h1);
  const EntropyResult r2 = calibrate_entropy_detail(h2);
  CHECK(r1.threshold_index == r2.threshold_index);
  CHECK(r2.params.scale == Catch::Approx(c * r1.params.scale).epsilon(1e-5));
}
