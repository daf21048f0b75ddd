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

// Classical detection of anonymized head regions.
//
// Two signatures are used. Defacing writes literal zeros, so enclosed
// zero-valued regions next to the head are flagged directly. Refacing
// replaces tissue with heavily smoothed values, which removes the
// voxel-scale noise every acquired image carries; voxels near the head whose
// local high-frequency energy collapses relative to the rest of the head are
// flagged as blurred.

#pragma once

#include <cstdint>
#include <string_view>

#include "volprep/grid.hpp"

namespace volprep {

struct DetectionParams {
  double zero_tolerance = 0.0;
  std::size_t min_zero_region_vox = 100;
  int blur_window_vox = 3;
  double blur_ratio_threshold = 0.35;
  /// Outward growth (voxels) of the blur core to recover the replacement seam.
  double boundary_growth_vox = 2.0;
  /// Depth below the head surface of the tissue that sets the reference
  /// noise level; falls back to the whole candidate domain when too thin.
  double reference_depth_mm = 15.0;
  /// Closing radius of the head envelope that separates background air from
  /// zero-filled cavities; only matters when the background is exactly zero.
  double envelope_radius_mm = 20.0;

  void validate() const;
};

enum class ModeGuess { None, DefaceLike, BlurLike, Mixed };
std::string_view to_string(ModeGuess m) noexcept;

struct DetectionResult {
  Mask3D anon_mask;
  ModeGuess mode_guess = ModeGuess::None;
  double confidence = 0.0;
  /// Segmented head with detected zero-filled regions restored.
  Mask3D head_mask;
  std::size_t zero_voxels = 0;
  std::size_t blur_voxels = 0;
};

/// Face6 components of |v| <= zero_tolerance that touch Dilate(head, 2), are
/// not background air reachable from the border, and hold at least
/// min_zero_region_vox voxels.
Mask3D detect_zero_regions(const Volume3D& vol, const Mask3D& head_mask, const DetectionParams& params);

/// Windowed mean (window_vox^3, clipped to the lattice) of the squared
/// gradient magnitude from central Face6 differences in mm units (one-sided
/// at the border, zero along singleton axes).
RealGrid blur_energy_map(const Grid3<double>& vol, int window_vox);

/// Windowed mean (same window as blur_energy_map) of the squared deviation
/// of each voxel from the mean of its in-lattice Face6 neighbours. The
/// voxel's own noise dominates, so the map tracks the local noise floor
/// with little spill across region boundaries.
RealGrid noise_energy_map(const Grid3<double>& vol, int window_vox);
/// Blur-signature path on its own; `exclude` voxels (e.g. zero regions) are
/// neither candidates nor part of the reference statistics.
Mask3D detect_blur_regions(const Volume3D& vol, const Mask3D& head_mask, const Mask3D& exclude,
                           const DetectionParams& params);

/// head via foreground defaults, then zero path and blur path.
DetectionResult detect_anonymization(const Volume3D& vol, const DetectionParams& params = {});

}  // namespace volprep
