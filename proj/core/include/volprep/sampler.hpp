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

// Foreground-constrained patch sampling with per-patch loss masks.
//
// A patch is centered on a foreground voxel drawn uniformly at random:
// origin = center - floor(size / 2) on every axis. Patches may hang off the
// volume; the overhang reads as zero and is excluded from the loss mask,
// as is every anonymized voxel.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep {

using PatchSize = std::array<std::size_t, 3>;

struct PatchSpec {
  PatchSize size{192, 192, 192};
  std::size_t count = 1;
  std::uint64_t seed = 0;
  /// 0 keeps the center-in-foreground rule only.
  double min_fg_fraction = 0.0;
  std::size_t max_attempts_per_patch = 1000;

  void validate() const;
};

struct PatchPlan {
  std::size_t index = 0;
  Index3 origin{};
  Index3 center{};
  double fg_fraction = 0.0;
  std::size_t attempts = 0;
};

struct SampledPatch {
  std::size_t index = 0;
  Index3 origin{};
  Index3 center{};
  PatchSize size{};
  std::vector<double> data;          // x fastest
  std::vector<std::uint8_t> loss_mask;
  double fg_fraction = 0.0;
};

/// Draws patch positions only. Output is ordered by patch index and does not
/// depend on `threads`. Throws EmptyForeground, SamplingExhausted.
std::vector<PatchPlan> plan_patches(const Mask3D& fg, const PatchSpec& spec, unsigned threads = 1);

/// Plans and materializes patches. `anon` may be null. Throws GridMismatch,
/// EmptyForeground, SamplingExhausted.
std::vector<SampledPatch> sample_patches(const Volume3D& vol, const Mask3D& fg, const Mask3D* anon,
                                         const PatchSpec& spec, unsigned threads = 1);

/// 1 on in-volume, non-anonymized voxels of the patch box, 0 elsewhere.
std::vector<std::uint8_t> make_loss_mask(const Index3& origin, const PatchSize& size, const Mask3D* anon,
                                         const Extents& volume_extents);

/// Patch-shaped copy of `vol` starting at `origin`; out-of-volume voxels are 0.
std::vector<double> crop_patch(const Grid3<double>& vol, const Index3& origin, const PatchSize& size);

/// Wraps a patch buffer as a grid whose affine places it at `origin` in the
/// source volume's world frame.
Grid3<double> patch_grid(const Geometry& source, const Index3& origin, const PatchSize& size,
                         std::vector<double> values);

}  // namespace volprep
