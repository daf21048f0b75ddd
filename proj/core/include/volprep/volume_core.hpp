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

#pragma once

#include <array>
#include <cstdint>

#include "volprep/grid.hpp"

namespace volprep {

inline constexpr std::size_t kHistogramBins = 256;

struct VolumeStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  double nonzero_fraction = 0.0;
  /// 256 equal-width bins over [min, max]; max falls in the last bin.
  std::array<std::uint64_t, kHistogramBins> histogram{};
};

/// Bin of `value` in a kHistogramBins histogram over [lo, hi]. A degenerate
/// range maps everything to bin 0.
inline std::size_t histogram_bin(double value, double lo, double hi) noexcept {
  if (!(hi > lo)) return 0;
  const double t = (value - lo) / (hi - lo) * static_cast<double>(kHistogramBins);
  if (!(t > 0.0)) return 0;
  const auto bin = static_cast<std::size_t>(t);
  return bin >= kHistogramBins ? kHistogramBins - 1 : bin;
}

/// Global z-score over every voxel, population std. Throws DegenerateVolume
/// when the volume is constant.
Volume3D zscore_normalize(const Volume3D& vol);

/// World position (mm) of a voxel center: affine * (i, j, k, 1).
Vec3 voxel_to_world(const Geometry& geometry, const Index3& index);
inline Vec3 voxel_to_world(const Volume3D& vol, const Index3& index) { return voxel_to_world(vol.geometry(), index); }

VolumeStats volume_stats(const Volume3D& vol);

}  // namespace volprep
