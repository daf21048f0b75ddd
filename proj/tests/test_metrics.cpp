// Copyright 2026 The volprep Authors
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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "phantoms.hpp"
#include "volprep/metrics.hpp"
#include "volprep/morphology.hpp"

namespace volprep {
namespace {

using testing::random_blobs;
using testing::random_mask;

Mask3D box_mask(Extents e, Index3 lo, Index3 size) {
  Mask3D m(Geometry(e, {1, 1, 1}));
  for (std::int64_t k = lo[2]; k < lo[2] + size[2]; ++k)
    for (std::int64_t j = lo[1]; j < lo[1] + size[1]; ++j)
      for (std::int64_t i = lo[0]; i < lo[0] + size[0]; ++i)
        m(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k)) = 1;
  return m;
}

/// Copy of `m` moved by `shift` inside a lattice grown by `grow` voxels per axis.
Mask3D translated(const Mask3D& m, Index3 shift, std::size_t grow) {
  const auto& e = m.extents();
  Mask3D out(Geometry({e.nx + grow, e.ny + grow, e.nz + grow}, m.spacing()));
  for (std::size_t k = 0; k < e.nz; ++k)
    for (std::size_t j = 0; j < e.ny; ++j)
      for (std::size_t i = 0; i < e.nx; ++i)
        out(i + static_cast<std::size_t>(shift[0]), j + static_cast<std::size_t>(shift[1]),
            k + static_cast<std::size_t>(shift[2])) = m(i, j, k);
  return out;
}

std::pair<Mask3D, Mask3D> random_pair(std::mt19937_64& rng, std::size_t max_side) {
  std::uniform_int_distribution<std::size_t> side(3, max_side);
  const Extents e{side(rng), side(rng), side(rng)};
  if (rng() % 2) return {random_blobs(e, 2, rng), random_blobs(e, 2, rng)};
  const double d = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
  return {random_mask(e, d, rng), random_mask(e, d, rng)};
}

TEST(Dice, Examples) {
  const auto a = box_mask({6, 4, 4}, {0, 0, 0}, {2, 2, 2});
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, box_mask({6, 4, 4}, {1, 0, 0}, {2, 2, 2})), 0.5);
  EXPECT_EQ(dice(a, box_mask({6, 4, 4}, {3, 0, 0}, {2, 2, 2})), 0.0);
  const Mask3D empty(Geometry({6, 4, 4}, {1, 1, 1}));
  EXPECT_EQ(dice(empty, empty), 1.0);
  EXPECT_EQ(dice(a, empty), 0.0);
  try {
    (void)dice(a, Mask3D(Geometry({4, 4, 4}, {1, 1, 1})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(HD95, Examples) {
  const auto a = box_mask({6, 6, 6}, {1, 1, 1}, {3, 3, 3});
  EXPECT_EQ(hd95(a, a, {1, 1, 1}), 0.0);

  Mask3D p(Geometry({3, 3, 8}, {1, 1, 2.5}));
  Mask3D q = p;
  p(1, 1, 1) = 1;
  q(1, 1, 5) = 1;
  EXPECT_EQ(hd95(p, q, {1, 1, 2.5}), 10.0);

  const Mask3D empty(Geometry({3, 3, 8}, {1, 1, 1}));
  EXPECT_FALSE(hd95(p, empty, {1, 1, 1}).has_value());
  EXPECT_FALSE(hd95(empty, empty, {1, 1, 1}).has_value());
  EXPECT_THROW((void)hd95(a, p, {1, 1, 1}), Error);
}

TEST(HD95, NearestRankPercentile) {
  std::vector<double> v(20);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(20 - i);
  EXPECT_EQ(nearest_rank_percentile(v, 95.0), 19.0);
  EXPECT_EQ(nearest_rank_percentile(v, 100.0), 20.0);
  EXPECT_EQ(nearest_rank_percentile(v, 1.0), 1.0);
  EXPECT_EQ(nearest_rank_percentile({7.0}, 95.0), 7.0);
  EXPECT_THROW((void)nearest_rank_percentile({}, 95.0), Error);
}

TEST(Metrics, MatchAllPairsOracles) {
  std::mt19937_64 rng(2024);
  const std::vector<Vec3> spacings{{1, 1, 1}, {1, 1, 2.5}, {0.6, 0.9, 1.7}};
  for (int trial = 0; trial < 150; ++trial) {
    auto [a, b] = random_pair(rng, 10);
    const auto& s = spacings[static_cast<std::size_t>(trial) % spacings.size()];
    ASSERT_EQ(dice(a, b), oracle::dice(a, b));
    const auto got = hd95(a, b, s);
    const auto want = oracle::hd95(a, b, s);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      ASSERT_NEAR(*got, *want, 1e-9);
      ASSERT_LE(*got, oracle::hausdorff(a, b, s) + 1e-12);
    }
  }
}

TEST(Metrics, Identities) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto [a, b] = random_pair(rng, 10);
    if (count_nonzero(a) == 0 || count_nonzero(b) == 0) continue;
    const Vec3 s{1.0, 0.8, 2.0};
    EXPECT_EQ(dice(a, a), 1.0);
    EXPECT_EQ(hd95(a, a, s), 0.0);
    EXPECT_EQ(dice(a, b), dice(b, a));
    EXPECT_EQ(hd95(a, b, s), hd95(b, a, s));

    const Index3 shift{static_cast<std::int64_t>(rng() % 3), static_cast<std::int64_t>(rng() % 3),
                       static_cast<std::int64_t>(rng() % 3)};
    const auto ta = translated(a, shift, 3);
    const auto tb = translated(b, shift, 3);
    const auto base_hd = hd95(translated(a, {0, 0, 0}, 3), translated(b, {0, 0, 0}, 3), s);
    EXPECT_EQ(dice(ta, tb), dice(a, b));
    EXPECT_EQ(hd95(ta, tb, s), base_hd);

    for (double c : {0.25, 0.5, 2.0, 8.0}) {
      const Vec3 sc{s[0] * c, s[1] * c, s[2] * c};
      EXPECT_EQ(*hd95(a, b, sc), c * *hd95(a, b, s));
    }
    for (double c : {0.3, 1.7, 3.0}) {
      const Vec3 sc{s[0] * c, s[1] * c, s[2] * c};
      const double want = c * *hd95(a, b, s);
      EXPECT_NEAR(*hd95(a, b, sc), want, 4.0 * std::numeric_limits<double>::epsilon() * want);
    }
  }
}

TEST(Metrics, TranslationInvarianceAwayFromTheBorder) {
  // Surfaces that touch the lattice border change when moved inward, so the
  // reference pair is placed inside the larger lattice first.
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 20; ++trial) {
    auto [a, b] = random_pair(rng, 8);
    if (count_nonzero(a) == 0 || count_nonzero(b) == 0) continue;
    const auto a1 = translated(a, {1, 1, 1}, 4);
    const auto b1 = translated(b, {1, 1, 1}, 4);
    const auto a2 = translated(a, {3, 2, 1}, 4);
    const auto b2 = translated(b, {3, 2, 1}, 4);
    EXPECT_EQ(hd95(a1, b1, {1, 1, 1}), hd95(a2, b2, {1, 1, 1}));
    EXPECT_EQ(dice(a1, b1), dice(a2, b2));
  }
}

TEST(Aggregate, Examples) {
  std::vector<SegMetrics> cases{{"a", 0.2, 1.0}, {"b", 0.4, std::nullopt}, {"c", 0.6, 3.0}};
  const auto d = aggregate_stats(cases, MetricField::Dice);
  EXPECT_NEAR(d.mean, 0.4, 1e-15);
  EXPECT_EQ(d.median, 0.4);
  EXPECT_EQ(d.n, 3u);
  EXPECT_EQ(d.n_undefined, 0u);

  const auto h = aggregate_stats(cases, MetricField::HD95);
  EXPECT_EQ(h.mean, 2.0);
  EXPECT_EQ(h.median, 2.0);
  EXPECT_EQ(h.n, 3u);
  EXPECT_EQ(h.n_undefined, 1u);

  const auto one = aggregate_stats({{"x", 0.9, 2.0}}, MetricField::Dice);
  EXPECT_EQ(one.mean, 0.9);
  EXPECT_EQ(one.median, 0.9);
  EXPECT_EQ(one.std, 0.0);
  EXPECT_EQ(one.whisker_lo, 0.9);

  try {
    (void)aggregate_stats({}, MetricField::Dice);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  try {
    (void)aggregate_stats({{"x", 0.0, std::nullopt}}, MetricField::HD95);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllUndefined);
  }
}

TEST(Aggregate, TukeyWhiskers) {
  const auto s = summarize({1, 2, 3, 4, 5, 6, 7, 8, 100});
  EXPECT_EQ(s.q1, 3.0);
  EXPECT_EQ(s.q3, 7.0);
  EXPECT_EQ(s.whisker_lo, 1.0);
  EXPECT_EQ(s.whisker_hi, 8.0);
}

TEST(Aggregate, MatchesSortBasedReference) {
  std::mt19937_64 rng(99);
  for (std::size_t n : {1u, 2u, 5u, 100u, 1000u, 1001u}) {
    std::vector<double> v(n);
    std::lognormal_distribution<double> dist(0.0, 1.0);
    for (auto& x : v) x = dist(rng);
    const auto got = summarize(v);
    const auto want = oracle::sorted_summary(v);
    EXPECT_NEAR(got.mean, want.mean, 1e-12);
    EXPECT_NEAR(got.std, want.std, 1e-12);
    EXPECT_NEAR(got.median, want.median, 1e-12);
    EXPECT_NEAR(got.q1, want.q1, 1e-12);
    EXPECT_NEAR(got.q3, want.q3, 1e-12);
    EXPECT_EQ(got.whisker_lo, want.whisker_lo);
    EXPECT_EQ(got.whisker_hi, want.whisker_hi);
    EXPECT_LE(got.q1, got.median);
    EXPECT_LE(got.median, got.q3);
  }
}

TEST(EvaluateCase, UsesReferenceSpacing) {
  Mask3D p(Geometry({3, 3, 8}, {1, 1, 2.5}));
  Mask3D q = p;
  p(1, 1, 1) = 1;
  q(1, 1, 5) = 1;
  const auto m = evaluate_case("pair", p, q);
  EXPECT_EQ(m.case_id, "pair");
  EXPECT_EQ(m.dice, 0.0);
  EXPECT_EQ(m.hd95_mm, 10.0);
}

}  // namespace
}  // namespace volprep
