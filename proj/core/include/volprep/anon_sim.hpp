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

// Synthetic anonymization of head volumes. Three schemes are modelled:
// zeroing the face and ears (Deface), replacing them with a blurred copy
// of the subject's own data (Reface), and additionally blurring the outer
// head shell (RefacePlus). Each result carries the exact set of altered
// voxels as ground truth.

#pragma once

#include <string_view>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep {

enum class AnonKind { Deface, Reface, RefacePlus };

std::string_view to_string(AnonKind kind) noexcept;
AnonKind parse_anon_kind(std::string_view text);

struct AnonScheme {
  AnonKind kind = AnonKind::Deface;
  double blur_sigma_mm = 6.0;
  double skull_shell_mm = 5.0;

  void validate() const;
};

struct FaceRegionParams {
  double anterior_fraction = 0.33;
  double inferior_fraction = 0.6;
  double ear_radius_mm = 15.0;
};

struct AnonResult {
  Volume3D volume;
  Mask3D altered_mask;
  AnonScheme scheme;
};

/// Voxel axis and direction (+1: increasing index) for each anatomical axis.
struct HeadAxes {
  std::size_t lateral_axis = 0;  // world x (left-right)
  std::size_t anterior_axis = 1;  // world y
  int anterior_sign = 1;
  std::size_t superior_axis = 2;  // world z
  int superior_sign = 1;
};

/// Reads anatomical directions off the affine's dominant components (RAS world).
/// Throws AmbiguousOrientation if a voxel axis lies more than 35 degrees
/// from every world axis (within 10 degrees of equidistant) or two voxel axes
/// share a world axis.
HeadAxes head_axes(const Affine& affine);

/// Anterior-inferior face cap plus two lateral ear balls, clipped to a
/// 2-voxel dilation of the head.
Mask3D build_face_region(const Mask3D& head_mask, double anterior_fraction, double inferior_fraction,
                         double ear_radius_mm);
inline Mask3D build_face_region(const Mask3D& head_mask, const FaceRegionParams& p = {}) {
  return build_face_region(head_mask, p.anterior_fraction, p.inferior_fraction, p.ear_radius_mm);
}

/// Separable Gaussian, per-axis sigma sigma_mm / spacing, truncated at 3 sigma,
/// renormalized where the kernel leaves the lattice.
Grid3<double> gaussian_blur(const Grid3<double>& vol, double sigma_mm);
Volume3D gaussian_blur(const Volume3D& vol, double sigma_mm);

/// Normalized 1D kernel taps [-radius, radius] used by gaussian_blur.
std::vector<double> gaussian_kernel(double sigma_vox);

AnonResult apply_anonymization(const Volume3D& vol, const Mask3D& head_mask, const AnonScheme& scheme,
                               const FaceRegionParams& region = {});

}  // namespace volprep
