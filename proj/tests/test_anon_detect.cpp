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

#include <random>

#include "oracles.hpp"
#include "phantoms.hpp"
#include "volprep/anon_detect.hpp"
#include "volprep/anon_sim.hpp"
#include "volprep/foreground.hpp"
#include "volprep/metrics.hpp"
#include "volprep/morphology.hpp"

namespace volprep {
namespace {

using testing::HeadPhantomOptions;
using testing::make_head_phantom;

Grid3<double> noise_grid(Extents e, std::uint64_t seed, Vec3 spacing = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  Grid3<double> g(Geometry(e, spacing));
  for (auto& x : g.voxels()) x = std::normal_distribution<double>(0.0, 10.0)(rng);
  return g;
}

std::vector<double> brute_noise_energy(const Grid3<double>& v, int window) {
  std::vector<double> dev(v.size());
  for (std::size_t n = 0; n < v.size(); ++n) {
    const Index3 p = v.coords(n);
    double sum = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        Index3 q = p;
        q[a] += s;
        if (!v.contains(q[0], q[1], q[2])) continue;
        sum += v(static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]), static_cast<std::size_t>(q[2]));
        ++count;
      }
    const double d = count ? v[n] - sum / count : 0.0;
    dev[n] = d * d;
  }
  std::vector<double> out(v.size());
  const int r = window / 2;
  for (std::size_t n = 0; n < v.size(); ++n) {
    const Index3 p = v.coords(n);
    double sum = 0.0;
    int count = 0;
    for (int dz = -r; dz <= r; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const Index3 q{p[0] + dx, p[1] + dy, p[2] + dz};
          if (!v.contains(q[0], q[1], q[2])) continue;
          sum += dev[v.index(static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]),
                             static_cast<std::size_t>(q[2]))];
          ++count;
        }
    out[n] = sum / count;
  }
  return out;
}

TEST(BlurEnergy, ConstantIsZero) {
  const Grid3<double> c(Geometry({7, 6, 5}, {1, 2, 3}), 42.0);
  const auto energy = blur_energy_map(c, 3);
  for (double v : energy.voxels()) EXPECT_EQ(v, 0.0);
  const auto noise = noise_energy_map(c, 5);
  for (double v : noise.voxels()) EXPECT_EQ(v, 0.0);
}

TEST(BlurEnergy, MatchesWindowOracle) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Vec3 sp = seed % 2 ? Vec3{1, 1, 1} : Vec3{0.8, 1.5, 2.5};
    const auto v = noise_grid({8, 8, 8}, seed, sp);
    for (int w : {3, 5, 7}) {
      const auto got = blur_energy_map(v, w);
      const auto want = oracle::windowed_energy(v, w);
      for (std::size_t n = 0; n < v.size(); ++n) ASSERT_NEAR(got[n], want[n], 1e-9);
      const auto noise = noise_energy_map(v, w);
      const auto ref = brute_noise_energy(v, w);
      for (std::size_t n = 0; n < v.size(); ++n) ASSERT_NEAR(noise[n], ref[n], 1e-9);
    }
  }
  const auto flat = noise_grid({4, 1, 6}, 1);
  const auto want = oracle::windowed_energy(flat, 3);
  const auto got = blur_energy_map(flat, 3);
  for (std::size_t n = 0; n < flat.size(); ++n) EXPECT_NEAR(got[n], want[n], 1e-9);
}

TEST(BlurEnergy, BlurringNoiseLowersEnergy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = noise_grid({16, 16, 16}, 100 + seed);
    const auto before = blur_energy_map(v, 5);
    const auto after = blur_energy_map(gaussian_blur(v, 6.0), 5);
    double eb = 0.0, ea = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) {
      eb += before[n];
      ea += after[n];
    }
    EXPECT_LT(ea, eb);
  }
}

TEST(BlurEnergy, RejectsBadWindows) {
  const auto v = noise_grid({4, 4, 4}, 1);
  EXPECT_THROW((void)blur_energy_map(v, 4), Error);
  EXPECT_THROW((void)blur_energy_map(v, 1), Error);
  EXPECT_THROW((void)noise_energy_map(v, 2), Error);
}

TEST(DetectionParams, Validation) {
  DetectionParams p;
  EXPECT_NO_THROW(p.validate());
  p.blur_window_vox = 4;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.blur_ratio_threshold = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.zero_tolerance = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.boundary_growth_vox = -1.0;
  EXPECT_THROW(p.validate(), Error);
}

class HeadSuite : public ::testing::Test {
 protected:
  static testing::HeadPhantom phantom(std::uint64_t seed, bool zero_background = false) {
    HeadPhantomOptions o;
    o.seed = seed;
    o.zero_background = zero_background;
    return make_head_phantom(o);
  }
};

TEST_F(HeadSuite, PristineHeadIsClean) {
  for (std::uint64_t seed : {11u, 12u}) {
    const auto ph = phantom(seed);
    const auto head = segment_foreground(ph.volume, ForegroundParams::defaults_for(ph.volume.modality()));
    EXPECT_EQ(count_nonzero(detect_zero_regions(ph.volume, head, {})), 0u);
    const auto r = detect_anonymization(ph.volume);
    EXPECT_LE(static_cast<double>(count_nonzero(r.anon_mask)), 0.005 * static_cast<double>(count_nonzero(head)));
    EXPECT_EQ(r.mode_guess == ModeGuess::None, count_nonzero(r.anon_mask) == 0);
  }
}

TEST_F(HeadSuite, DefaceIsFoundByTheZeroPath) {
  const auto ph = phantom(21);
  const auto sim = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Deface});
  const auto r = detect_anonymization(sim.volume);
  EXPECT_EQ(r.mode_guess, ModeGuess::DefaceLike);
  EXPECT_GE(dice(r.anon_mask, sim.altered_mask), 0.98);
  EXPECT_GE(r.confidence, 0.0);
  EXPECT_LE(r.confidence, 1.0);
  EXPECT_TRUE(is_subset(r.anon_mask, dilate(r.head_mask, StructuringElement::ball(2.0))));

  // Every simulated component large enough is hit.
  const auto cc = connected_components(sim.altered_mask, Connectivity::Face6);
  std::vector<std::uint8_t> hit(cc.count + 1, 0);
  for (std::size_t n = 0; n < r.anon_mask.size(); ++n)
    if (r.anon_mask[n] && cc.labels[n]) hit[static_cast<std::size_t>(cc.labels[n])] = 1;
  for (std::size_t l = 1; l <= cc.count; ++l)
    if (cc.sizes[l] >= DetectionParams{}.min_zero_region_vox) {
      EXPECT_TRUE(hit[l]) << "component " << l;
    }
}

TEST_F(HeadSuite, RefaceSchemesAreFoundByTheBlurPath) {
  const auto ph = phantom(31);
  for (AnonKind kind : {AnonKind::Reface, AnonKind::RefacePlus}) {
    const auto sim = apply_anonymization(ph.volume, ph.head, {.kind = kind, .blur_sigma_mm = 6.0});
    const auto r = detect_anonymization(sim.volume);
    EXPECT_EQ(r.mode_guess, ModeGuess::BlurLike) << to_string(kind);
    EXPECT_GE(dice(r.anon_mask, sim.altered_mask), 0.90) << to_string(kind);
    EXPECT_TRUE(is_subset(r.anon_mask, dilate(r.head_mask, StructuringElement::ball(2.0))));
  }
}

TEST_F(HeadSuite, ZeroBackgroundKeepsOnlyTheNotch) {
  const auto ph = phantom(41, true);
  const auto pristine_head = segment_foreground(ph.volume, ForegroundParams::defaults_for(Modality::MR));
  EXPECT_EQ(count_nonzero(detect_zero_regions(ph.volume, pristine_head, {})), 0u);

  const auto sim = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Deface});
  const auto r = detect_anonymization(sim.volume);
  EXPECT_EQ(r.mode_guess, ModeGuess::DefaceLike);
  // Nothing connected to the border through background air is flagged, and
  // the flagged set is all altered voxels.
  EXPECT_GT(count_nonzero(r.anon_mask), 0u);
  EXPECT_TRUE(is_subset(r.anon_mask, sim.altered_mask));
  std::size_t border_hits = 0;
  const auto& e = r.anon_mask.extents();
  for (std::size_t n = 0; n < r.anon_mask.size(); ++n) {
    const Index3 p = r.anon_mask.coords(n);
    const bool on_border = p[0] == 0 || p[1] == 0 || p[2] == 0 || p[0] + 1 == static_cast<std::int64_t>(e.nx) ||
                           p[1] + 1 == static_cast<std::int64_t>(e.ny) || p[2] + 1 == static_cast<std::int64_t>(e.nz);
    border_hits += on_border && r.anon_mask[n];
  }
  EXPECT_EQ(border_hits, 0u);
}

TEST_F(HeadSuite, BlurSetGrowsWithTheRatio) {
  const auto ph = phantom(51);
  const auto sim = apply_anonymization(ph.volume, ph.head, {.kind = AnonKind::Reface});
  const Mask3D none(ph.head.geometry());
  Mask3D previous(ph.head.geometry());
  for (double ratio : {0.1, 0.2, 0.35, 0.5, 0.7, 0.9}) {
    DetectionParams p;
    p.blur_ratio_threshold = ratio;
    const auto blur = detect_blur_regions(sim.volume, ph.head, none, p);
    EXPECT_TRUE(is_subset(previous, blur)) << "ratio " << ratio;
    EXPECT_TRUE(is_subset(blur, dilate(ph.head, StructuringElement::ball(2.0))));
    previous = blur;
  }
}

TEST_F(HeadSuite, SmallZeroComponentsAreDropped) {
  auto ph = phantom(61);
  // A 3x3x3 zero pocket inside the head: 27 voxels, below the default floor.
  for (std::size_t k = 50; k < 53; ++k)
    for (std::size_t j = 50; j < 53; ++j)
      for (std::size_t i = 40; i < 43; ++i) ph.volume(i, j, k) = 0.0;
  EXPECT_EQ(count_nonzero(detect_zero_regions(ph.volume, ph.head, {})), 0u);
  DetectionParams p;
  p.min_zero_region_vox = 20;
  EXPECT_EQ(count_nonzero(detect_zero_regions(ph.volume, ph.head, p)), 27u);
  EXPECT_THROW((void)detect_zero_regions(ph.volume, Mask3D(ph.head.geometry()), p), Error);
}

}  // namespace
}  // namespace volprep
