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
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "volprep/volume_core.hpp"

namespace volprep {
namespace {

Volume3D from_values(Extents e, std::vector<double> values) {
  return Volume3D(Geometry(e, {1.0, 1.0, 1.0}), std::move(values));
}

Volume3D random_volume(Extents e, std::uint64_t seed, double lo = -50.0, double hi = 250.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Volume3D v(Geometry(e, {1.0, 1.0, 1.0}));
  for (auto& x : v.voxels()) x = u(rng);
  return v;
}

TEST(ZScore, SmallExample) {
  const auto out = zscore_normalize(from_values({4, 1, 1}, {0, 0, 10, 10}));
  EXPECT_DOUBLE_EQ(out[0], -1.0);
  EXPECT_DOUBLE_EQ(out[1], -1.0);
  EXPECT_DOUBLE_EQ(out[2], 1.0);
  EXPECT_DOUBLE_EQ(out[3], 1.0);
}

TEST(ZScore, MeanZeroStdOneAndGeometryKept) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Volume3D v = random_volume({7, 6, 5}, seed);
    v.set_modality(Modality::CT);
    const auto out = zscore_normalize(v);
    const auto s = oracle::two_pass(out.voxels());
    EXPECT_NEAR(s.mean, 0.0, 1e-9);
    EXPECT_NEAR(s.std, 1.0, 1e-9);
    EXPECT_EQ(out.extents(), v.extents());
    EXPECT_EQ(out.affine(), v.affine());
    EXPECT_EQ(out.modality(), Modality::CT);
  }
}

TEST(ZScore, Idempotent) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto once = zscore_normalize(random_volume({8, 8, 8}, seed));
    const auto twice = zscore_normalize(once);
    for (std::size_t n = 0; n < once.size(); ++n) ASSERT_NEAR(twice[n], once[n], 1e-9);
  }
}

TEST(ZScore, ConstantIsDegenerate) {
  const Volume3D c(Geometry({3, 3, 3}, {1, 1, 1}), 7.0);
  try {
    (void)zscore_normalize(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVolume);
  }
}

TEST(VoxelToWorld, Examples) {
  const Volume3D iso(Geometry({4, 4, 8}, {1, 1, 1}));
  EXPECT_EQ(voxel_to_world(iso, {0, 0, 0}), (Vec3{0, 0, 0}));
  const Volume3D aniso(Geometry({4, 4, 8}, {1, 1, 2.5}));
  EXPECT_EQ(voxel_to_world(aniso, {0, 0, 4}), (Vec3{0, 0, 10}));
  try {
    (void)voxel_to_world(aniso, {4, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfBounds);
  }
  EXPECT_THROW((void)voxel_to_world(aniso, {0, -1, 0}), Error);
}

TEST(VoxelToWorld, IsAffine) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Geometry g({20, 20, 20}, {1, 1, 1});
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 4; ++c) g.affine[r][c] = u(rng);
    const auto f = [&](Index3 i) { return voxel_to_world(g, i); };
    const Index3 a{static_cast<std::int64_t>(rng() % 10), static_cast<std::int64_t>(rng() % 10),
                   static_cast<std::int64_t>(rng() % 10)};
    const Index3 b{static_cast<std::int64_t>(rng() % 10), static_cast<std::int64_t>(rng() % 10),
                   static_cast<std::int64_t>(rng() % 10)};
    const auto fa = f(a), fb = f(b), f0 = f({0, 0, 0}), fs = f({a[0] + b[0], a[1] + b[1], a[2] + b[2]});
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(fa[d] + fb[d] - f0[d], fs[d], 1e-12);
  }
}

TEST(VolumeStats, Examples) {
  const auto c = volume_stats(Volume3D(Geometry({2, 2, 2}, {1, 1, 1}), 5.0));
  EXPECT_EQ(c.min, 5.0);
  EXPECT_EQ(c.max, 5.0);
  EXPECT_EQ(c.mean, 5.0);
  EXPECT_EQ(c.std, 0.0);
  EXPECT_EQ(c.histogram[0], 8u);

  const auto pm = volume_stats(from_values({2, 1, 1}, {-1, 1}));
  EXPECT_EQ(pm.mean, 0.0);
  EXPECT_EQ(pm.std, 1.0);
  EXPECT_EQ(pm.nonzero_fraction, 1.0);
  EXPECT_EQ(pm.histogram[0], 1u);
  EXPECT_EQ(pm.histogram[255], 1u);
}

TEST(VolumeStats, MatchesTwoPassReference) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto v = random_volume({8, 8, 8}, seed, -1e3, 3e3);
    for (std::size_t n = 0; n < v.size(); n += 5) v[n] = 0.0;
    const auto s = volume_stats(v);
    const auto ref = oracle::two_pass(v.voxels());
    EXPECT_EQ(s.min, ref.min);
    EXPECT_EQ(s.max, ref.max);
    EXPECT_NEAR(s.mean, ref.mean, 1e-12 * std::max(1.0, std::abs(ref.mean)));
    EXPECT_NEAR(s.std, ref.std, 1e-12 * std::max(1.0, ref.std));
    const auto zeros = static_cast<double>(std::count(v.voxels().begin(), v.voxels().end(), 0.0));
    EXPECT_DOUBLE_EQ(s.nonzero_fraction, 1.0 - zeros / static_cast<double>(v.size()));

    std::array<std::uint64_t, kHistogramBins> hist{};
    for (double x : v.voxels()) {
      auto bin = static_cast<std::size_t>(std::floor((x - ref.min) / (ref.max - ref.min) * 256.0));
      ++hist[std::min<std::size_t>(bin, 255)];
    }
    EXPECT_EQ(s.histogram, hist);
    EXPECT_EQ(std::accumulate(s.histogram.begin(), s.histogram.end(), std::uint64_t{0}), v.size());
    EXPECT_LE(s.min, s.mean);
    EXPECT_LE(s.mean, s.max);
  }
}

}  // namespace
}  // namespace volprep
