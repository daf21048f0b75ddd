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
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "phantoms.hpp"
#include "volprep/anon_detect.hpp"
#include "volprep/anon_sim.hpp"
#include "volprep/morphology.hpp"

namespace volprep {
namespace {

using testing::HeadPhantomOptions;
using testing::make_head_phantom;

testing::HeadPhantom small_head(std::uint64_t seed) {
  HeadPhantomOptions o;
  o.extents = {42, 50, 52};
  o.spacing = {2.0, 2.0, 2.0};
  o.seed = seed;
  return make_head_phantom(o);
}

Mask3D sphere(std::size_t n, double radius) {
  Mask3D m(Geometry({n, n, n}, {1, 1, 1}));
  const double c = static_cast<double>(n - 1) / 2.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - c, dy = static_cast<double>(j) - c, dz = static_cast<double>(k) - c;
        m(i, j, k) = dx * dx + dy * dy + dz * dz <= radius * radius ? 1 : 0;
      }
  return m;
}

Affine rotation_about_z(double deg) {
  const double r = deg * std::numbers::pi / 180.0;
  Affine a = diagonal_affine({1, 1, 1});
  a[0][0] = std::cos(r);
  a[0][1] = -std::sin(r);
  a[1][0] = std::sin(r);
  a[1][1] = std::cos(r);
  return a;
}

TEST(HeadAxes, ReadsPermutationsAndFlips) {
  const auto ras = head_axes(diagonal_affine({1, 1, 1}));
  EXPECT_EQ(ras.lateral_axis, 0u);
  EXPECT_EQ(ras.anterior_axis, 1u);
  EXPECT_EQ(ras.superior_axis, 2u);
  EXPECT_EQ(ras.anterior_sign, 1);

  // Voxel axes (z, -x, y): columns map voxel i to world z, j to -x, k to y.
  Affine p{};
  p[2][0] = 1.0;
  p[0][1] = -2.0;
  p[1][2] = -1.5;
  p[3][3] = 1.0;
  const auto axes = head_axes(p);
  EXPECT_EQ(axes.superior_axis, 0u);
  EXPECT_EQ(axes.superior_sign, 1);
  EXPECT_EQ(axes.lateral_axis, 1u);
  EXPECT_EQ(axes.anterior_axis, 2u);
  EXPECT_EQ(axes.anterior_sign, -1);

  EXPECT_NO_THROW((void)head_axes(rotation_about_z(30.0)));
}

TEST(HeadAxes, AmbiguousOrientation) {
  for (double deg : {40.0, 45.0, 50.0}) {
    try {
      (void)head_axes(rotation_about_z(deg));
      ADD_FAILURE() << deg;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::AmbiguousOrientation);
    }
  }
  Affine dup = diagonal_affine({1, 1, 1});
  dup[0][1] = 1.0;
  dup[1][1] = 0.0;
  EXPECT_THROW((void)head_axes(dup), Error);
}

TEST(FaceRegion, SphereMatchesGeometry) {
  const std::size_t n = 41;
  const double radius = 15.0;
  const auto head = sphere(n, radius);
  const auto region = build_face_region(head, 0.33, 0.6, 15.0);

  // Box 5..35 (31 voxels); ear centers at the lateral extremes of plane k = 20.
  Mask3D want(head.geometry());
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const double t_ant = (static_cast<double>(j) - 5.0 + 0.5) / 31.0;
        const double t_sup = (static_cast<double>(k) - 5.0 + 0.5) / 31.0;
        const bool cap = head(i, j, k) && t_ant > 0.67 && t_sup < 0.6;
        bool ear = false;
        for (double cx : {5.0, 35.0}) {
          const double dx = static_cast<double>(i) - cx, dy = static_cast<double>(j) - 20.0,
                       dz = static_cast<double>(k) - 20.0;
          ear = ear || dx * dx + dy * dy + dz * dz <= 225.0;
        }
        want(i, j, k) = cap || ear;
      }
  want = mask_and(want, oracle::dilate(head, oracle::ball_offsets(2.0)));
  EXPECT_EQ(region, want);
  EXPECT_TRUE(is_subset(region, dilate(head, StructuringElement::ball(2.0))));
  EXPECT_GT(count_nonzero(region), 0u);
}

TEST(FaceRegion, FlippedAnteriorAxisMirrorsTheRegion) {
  const std::size_t n = 41;
  const auto head = sphere(n, 15.0);
  const auto region = build_face_region(head);
  Geometry g = head.geometry();
  g.affine[1][1] = -1.0;
  g.affine[1][3] = static_cast<double>(n - 1);
  Mask3D flipped(g);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) flipped(i, n - 1 - j, k) = head(i, j, k);
  const auto flipped_region = build_face_region(flipped);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(flipped_region(i, n - 1 - j, k), region(i, j, k));
}

TEST(FaceRegion, DegenerateInputs) {
  const auto head = sphere(21, 8.0);
  EXPECT_EQ(count_nonzero(build_face_region(head, 0.0, 0.6, 0.0)), 0u);
  try {
    (void)build_face_region(Mask3D(head.geometry()), 0.33, 0.6, 15.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyHeadMask);
  }
  Mask3D rotated(Geometry({21, 21, 21}, {1, 1, 1}, rotation_about_z(45.0)));
  rotated[rotated.index(10, 10, 10)] = 1;
  try {
    (void)build_face_region(rotated, 0.33, 0.6, 15.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguousOrientation);
  }
}

TEST(GaussianBlur, KernelIsNormalizedAndTruncated) {
  const auto k = gaussian_kernel(1.0);
  EXPECT_EQ(k.size(), 7u);
  EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-15);
  EXPECT_EQ(gaussian_kernel(2.5).size(), 17u);
}

TEST(GaussianBlur, ConstantIsUnchanged) {
  const Grid3<double> c(Geometry({9, 7, 5}, {1.0, 2.0, 0.5}), 3.25);
  for (double sigma : {0.5, 2.0, 6.0}) {
    const auto blurred = gaussian_blur(c, sigma);
    for (double v : blurred.voxels()) ASSERT_NEAR(v, 3.25, 1e-12);
  }
}

TEST(GaussianBlur, ImpulseCenterWeight) {
  Grid3<double> v(Geometry({15, 15, 15}, {1, 1, 1}));
  v(7, 7, 7) = 1.0;
  double s = 0.0;
  for (int t = -3; t <= 3; ++t) s += std::exp(-0.5 * t * t);
  const double w0 = 1.0 / s;
  EXPECT_NEAR(gaussian_blur(v, 1.0)(7, 7, 7), w0 * w0 * w0, 1e-15);
}

TEST(GaussianBlur, MatchesDenseConvolution) {
  std::mt19937_64 rng(6);
  for (const Vec3& sp : {Vec3{1, 1, 1}, Vec3{1, 1, 2.5}, Vec3{0.8, 1.6, 1.2}}) {
    Grid3<double> v(Geometry({8, 8, 8}, sp));
    for (auto& x : v.voxels()) x = std::uniform_real_distribution<double>(-100, 100)(rng);
    for (double sigma : {0.7, 1.5, 3.0}) {
      const auto got = gaussian_blur(v, sigma);
      const auto want = oracle::dense_gaussian(v, sigma);
      for (std::size_t n = 0; n < v.size(); ++n) ASSERT_NEAR(got[n], want[n], 1e-10);
    }
  }
  EXPECT_THROW((void)gaussian_blur(Grid3<double>(Geometry({2, 2, 2}, {1, 1, 1})), 0.0), Error);
}

TEST(Anonymize, SupportAndZeroProperties) {
  const auto ph = small_head(3);
  for (AnonKind kind : {AnonKind::Deface, AnonKind::Reface, AnonKind::RefacePlus}) {
    const auto r = apply_anonymization(ph.volume, ph.head, {.kind = kind});
    EXPECT_EQ(r.scheme.kind, kind);
    ASSERT_GT(count_nonzero(r.altered_mask), 0u);
    for (std::size_t n = 0; n < r.volume.size(); ++n) {
      if (!r.altered_mask[n]) {
        ASSERT_EQ(std::memcmp(&r.volume[n], &ph.volume[n], sizeof(double)), 0);
      } else if (kind == AnonKind::Deface) {
        ASSERT_EQ(r.volume[n], 0.0);
      }
    }
    EXPECT_EQ(r.volume.geometry().extents, ph.volume.extents());
  }
}

TEST(Anonymize, ReplacementIsTheBlurredVolume) {
  const auto ph = small_head(4);
  const auto r = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Reface, .blur_sigma_mm = 6.0});
  const auto blurred = gaussian_blur(ph.volume, 6.0);
  for (std::size_t n = 0; n < r.volume.size(); ++n)
    if (r.altered_mask[n]) {
      ASSERT_EQ(r.volume[n], blurred[n]);
    }
}

TEST(Anonymize, MaskNesting) {
  const auto ph = small_head(5);
  const auto deface = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Deface});
  const auto reface = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Reface});
  const auto plus = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::RefacePlus, .skull_shell_mm = 5.0});
  EXPECT_EQ(deface.altered_mask, reface.altered_mask);
  EXPECT_TRUE(is_subset(reface.altered_mask, plus.altered_mask));
  const auto shell = mask_minus(ph.head, erode(ph.head, StructuringElement::ball_mm(5.0, ph.head.spacing())));
  EXPECT_EQ(plus.altered_mask, mask_or(reface.altered_mask, shell));
}

TEST(Anonymize, Deterministic) {
  const auto ph = small_head(6);
  const AnonScheme s{.kind = AnonKind::RefacePlus};
  const auto a = apply_anonymization(ph.volume, ph.head, s);
  const auto b = apply_anonymization(ph.volume, ph.head, s);
  EXPECT_EQ(a.altered_mask, b.altered_mask);
  EXPECT_EQ(std::memcmp(a.volume.data().data(), b.volume.data().data(), a.volume.size() * sizeof(double)), 0);
}

TEST(Anonymize, RefaceLowersGradientEnergy) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto ph = small_head(seed);
    const auto r = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Reface});
    const auto before = blur_energy_map(ph.volume, 5);
    const auto after = blur_energy_map(r.volume, 5);
    double eb = 0.0, ea = 0.0;
    for (std::size_t n = 0; n < r.volume.size(); ++n)
      if (r.altered_mask[n]) {
        eb += before[n];
        ea += after[n];
      }
    EXPECT_LT(ea, eb);
  }
}

TEST(Anonymize, Errors) {
  const auto ph = small_head(7);
  EXPECT_THROW((void)apply_anonymization(ph.volume, Mask3D(ph.head.geometry()), {}), Error);
  EXPECT_THROW((void)apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Reface, .blur_sigma_mm = 0.0}),
               Error);
  EXPECT_THROW((void)apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::RefacePlus, .skull_shell_mm = -1.0}),
               Error);
  EXPECT_THROW((void)apply_anonymization(ph.volume, Mask3D(Geometry({3, 3, 3}, {2, 2, 2}), 1), {}), Error);
}

TEST(AnonKind, Parsing) {
  EXPECT_EQ(parse_anon_kind("deface"), AnonKind::Deface);
  EXPECT_EQ(parse_anon_kind("Reface"), AnonKind::Reface);
  EXPECT_EQ(parse_anon_kind("reface-plus"), AnonKind::RefacePlus);
  EXPECT_EQ(parse_anon_kind("reface_plus"), AnonKind::RefacePlus);
  EXPECT_EQ(to_string(AnonKind::RefacePlus), "reface-plus");
  EXPECT_THROW((void)parse_anon_kind("shuffle"), Error);
}

}  // namespace
}  // namespace volprep
