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

#include "volprep/volume_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volprep {

namespace {

// Mean and population std with a compensated second pass.
std::pair<double, double> mean_std(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  double sq = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double d = v - mean;
    sq += d * d;
    comp += d;
  }
  const double var = (sq - comp * comp / n) / n;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace

Volume3D zscore_normalize(const Volume3D& vol) {
  if (vol.empty()) throw Error(ErrorCode::DegenerateVolume, "empty volume");
  const auto [mean, sd] = mean_std(vol.data());
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateVolume, "zero variance; z-score undefined");
  Volume3D out(vol.geometry(), 0.0, vol.modality());
  for (std::size_t n = 0; n < vol.size(); ++n) out[n] = (vol[n] - mean) / sd;
  return out;
}

Vec3 voxel_to_world(const Geometry& geometry, const Index3& index) {
  const auto& e = geometry.extents;
  for (std::size_t a = 0; a < 3; ++a)
    if (index[a] < 0 || static_cast<std::size_t>(index[a]) >= e[a])
      throw Error(ErrorCode::IndexOutOfBounds, "voxel index outside extents");
  const auto& m = geometry.affine;
  Vec3 world{};
  for (std::size_t r = 0; r < 3; ++r)
    world[r] = m[r][0] * static_cast<double>(index[0]) + m[r][1] * static_cast<double>(index[1]) +
               m[r][2] * static_cast<double>(index[2]) + m[r][3];
  return world;
}

VolumeStats volume_stats(const Volume3D& vol) {
  VolumeStats s;
  if (vol.empty()) return s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  std::size_t nonzero = 0;
  for (double v : vol.data()) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    nonzero += v != 0.0;
  }
  const auto [mean, sd] = mean_std(vol.data());
  // Rounding can push the mean of a near-constant volume a hair outside [min, max].
  s.mean = std::clamp(mean, s.min, s.max);
  s.std = sd;
  s.nonzero_fraction = static_cast<double>(nonzero) / static_cast<double>(vol.size());
  for (double v : vol.data()) ++s.histogram[histogram_bin(v, s.min, s.max)];
  return s;
}

}  // namespace volprep
