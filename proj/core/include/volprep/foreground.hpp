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

// Classical anatomical-foreground pipeline: constant-padding detection,
// intensity threshold, closing, component selection, hole filling.

#pragma once

#include <optional>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep {

enum class ThresholdMode { Otsu, FixedCT, Manual };
enum class KeepComponents { Largest, AllAboveFraction };

struct ForegroundParams {
  ThresholdMode threshold_mode = ThresholdMode::Otsu;
  /// Used by FixedCT (HU) and Manual (raw intensity).
  double threshold_value = -500.0;
  double closing_radius_mm = 3.0;
  /// Components smaller than this fraction of the largest one are dropped.
  double min_component_fraction = 0.01;
  KeepComponents keep_components = KeepComponents::AllAboveFraction;

  /// FixedCT(-500 HU) for CT, Otsu for MR and unknown.
  static ForegroundParams defaults_for(Modality modality);
  void validate() const;
};

struct PaddingReport {
  Mask3D padding_mask;
  std::vector<double> padding_values;  // ascending
  double padded_fraction = 0.0;
};

inline constexpr double kPaddingMinOccupancy = 0.01;

/// Otsu threshold over a 256-bin histogram of the non-excluded voxels. The
/// returned value t splits the classes as `v > t`; it is the midpoint between
/// the largest lower-class value and the smallest upper-class value. Ties in
/// between-class variance go to the lower cut. Throws DegenerateVolume.
double otsu_threshold(const Volume3D& vol, const Mask3D* exclude = nullptr);

/// Border-touching Face6 components of any exact value held by >= 1% of voxels.
PaddingReport detect_constant_padding(const Volume3D& vol);

struct ForegroundResult {
  Mask3D mask;
  PaddingReport padding;
  double threshold = 0.0;
};

/// Full pipeline with diagnostics. Throws DegenerateVolume, EmptyForeground.
ForegroundResult segment_foreground_detailed(const Volume3D& vol, const ForegroundParams& params);

inline Mask3D segment_foreground(const Volume3D& vol, const ForegroundParams& params) {
  return segment_foreground_detailed(vol, params).mask;
}

/// Component selection step on its own (Full26 components).
Mask3D select_components(const Mask3D& mask, KeepComponents policy, double min_component_fraction);

}  // namespace volprep
