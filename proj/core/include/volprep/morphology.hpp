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

// Binary morphology and mask geometry on 3D lattices.
//
// Structuring-element radii are in voxels. Callers holding a radius in mm
// convert per axis with StructuringElement::ball_mm, which yields an
// ellipsoid in index space that is a true ball in world space.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep {

enum class MorphOp { Dilate, Erode, Open, Close };
enum class Connectivity { Face6, Full26 };
/// How voxels beyond the lattice are seen by a neighborhood.
enum class Border { Background, Replicate };

class StructuringElement {
 public:
  enum class Shape { Ball, Box, Custom };

  /// Offsets o with sum((o_a / r_a)^2) <= 1 for the given per-axis voxel radii.
  static StructuringElement ball(const Vec3& radii_vox);
  static StructuringElement ball(double radius_vox) { return ball(Vec3{radius_vox, radius_vox, radius_vox}); }
  /// Ball of `radius_mm` in world units on a lattice with `spacing`.
  static StructuringElement ball_mm(double radius_mm, const Vec3& spacing);
  static StructuringElement box(const Index3& half_extent);
  static StructuringElement box(std::int64_t half_extent) { return box(Index3{half_extent, half_extent, half_extent}); }
  /// Throws InvalidArgument unless the set contains the origin and is symmetric.
  static StructuringElement from_offsets(std::vector<Index3> offsets);

  Shape shape() const noexcept { return shape_; }
  const std::vector<Index3>& offsets() const noexcept { return offsets_; }
  /// Largest |offset| per axis.
  Index3 reach() const noexcept { return reach_; }

  /// Balls are also described as {o : sum((o_a * scale_a)^2) <= radius^2},
  /// which lets large balls go through the distance transform.
  struct Metric {
    Vec3 scale;
    double radius = 0.0;
  };
  const std::optional<Metric>& metric() const noexcept { return metric_; }

 private:
  StructuringElement(Shape shape, std::vector<Index3> offsets, std::optional<Metric> metric = std::nullopt);

  Shape shape_;
  std::vector<Index3> offsets_;
  Index3 reach_{};
  std::optional<Metric> metric_;
};

/// Dilation / erosion / opening / closing. With Border::Background, voxels
/// outside the lattice are background for every op.
Mask3D binary_morph(const Mask3D& mask, MorphOp op, const StructuringElement& se,
                    Border border = Border::Background);

inline Mask3D dilate(const Mask3D& m, const StructuringElement& se) { return binary_morph(m, MorphOp::Dilate, se); }
inline Mask3D erode(const Mask3D& m, const StructuringElement& se) { return binary_morph(m, MorphOp::Erode, se); }

struct LabeledComponents {
  Grid3<std::int32_t> labels;  // 0 = background
  std::size_t count = 0;
  /// sizes[label] for label in [1, count]; sizes[0] is always 0.
  std::vector<std::size_t> sizes;
};

/// Labels in first-encounter order of an x-fastest scan.
LabeledComponents connected_components(const Mask3D& mask, Connectivity connectivity = Connectivity::Full26);

/// Background (Face6) not reachable from the lattice border becomes foreground.
Mask3D fill_holes(const Mask3D& mask);

/// Foreground voxels with at least one Face6 neighbor that is background or
/// outside the lattice.
Mask3D extract_surface(const Mask3D& mask);

/// Exact Euclidean distance (mm) from each voxel center to the nearest
/// foreground voxel center; 0 on foreground. Throws EmptyMask.
RealGrid distance_transform(const Mask3D& mask, const Vec3& spacing);
/// Same, squared.
RealGrid squared_distance_transform(const Mask3D& mask, const Vec3& spacing);

// Voxelwise set algebra; operands must share a lattice.
Mask3D mask_and(const Mask3D& a, const Mask3D& b);
Mask3D mask_or(const Mask3D& a, const Mask3D& b);
Mask3D mask_minus(const Mask3D& a, const Mask3D& b);
Mask3D mask_not(const Mask3D& a);
bool is_subset(const Mask3D& a, const Mask3D& b);

/// Face6 components of `mask` touching the lattice border.
Mask3D border_connected(const Mask3D& mask);

}  // namespace volprep
