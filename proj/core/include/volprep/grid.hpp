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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "volprep/error.hpp"

namespace volprep {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<std::int64_t, 3>;
/// Row-major 4x4 matrix mapping homogeneous voxel indices to world mm.
using Affine = std::array<std::array<double, 4>, 4>;

struct Extents {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const noexcept { return nx * ny * nz; }
  std::size_t operator[](std::size_t axis) const noexcept {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  bool operator==(const Extents&) const = default;
};

enum class Modality { CT, MR, Unknown };

Affine diagonal_affine(const Vec3& spacing);

/// Voxel lattice shared by a volume and every mask derived from it.
struct Geometry {
  Extents extents;
  Vec3 spacing{1.0, 1.0, 1.0};
  Affine affine = diagonal_affine({1.0, 1.0, 1.0});

  Geometry() = default;
  Geometry(Extents e, Vec3 s);
  Geometry(Extents e, Vec3 s, const Affine& a);

  /// Same voxel lattice: extents and spacing agree exactly.
  bool same_grid(const Geometry& other) const noexcept {
    return extents == other.extents && spacing == other.spacing;
  }
};

/// Dense scalar grid, x fastest (NIfTI storage order).
template <typename T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;
  explicit Grid3(Geometry geometry, T fill = T{})
      : geometry_(std::move(geometry)), voxels_(geometry_.extents.count(), fill) {}
  Grid3(Geometry geometry, std::vector<T> voxels) : geometry_(std::move(geometry)), voxels_(std::move(voxels)) {
    if (voxels_.size() != geometry_.extents.count())
      throw Error(ErrorCode::ExtentMismatch, "voxel buffer does not match extents");
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Extents& extents() const noexcept { return geometry_.extents; }
  const Vec3& spacing() const noexcept { return geometry_.spacing; }
  const Affine& affine() const noexcept { return geometry_.affine; }
  std::size_t size() const noexcept { return voxels_.size(); }
  bool empty() const noexcept { return voxels_.empty(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + geometry_.extents.nx * (j + geometry_.extents.ny * k);
  }
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    const auto& e = geometry_.extents;
    return i >= 0 && j >= 0 && k >= 0 && static_cast<std::size_t>(i) < e.nx &&
           static_cast<std::size_t>(j) < e.ny && static_cast<std::size_t>(k) < e.nz;
  }
  Index3 coords(std::size_t linear) const noexcept {
    const auto& e = geometry_.extents;
    const auto i = linear % e.nx;
    const auto j = (linear / e.nx) % e.ny;
    const auto k = linear / (e.nx * e.ny);
    return {static_cast<std::int64_t>(i), static_cast<std::int64_t>(j), static_cast<std::int64_t>(k)};
  }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return voxels_[index(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return voxels_[index(i, j, k)];
  }
  T& operator[](std::size_t linear) noexcept { return voxels_[linear]; }
  const T& operator[](std::size_t linear) const noexcept { return voxels_[linear]; }

  std::span<T> data() noexcept { return voxels_; }
  std::span<const T> data() const noexcept { return voxels_; }
  std::vector<T>& voxels() noexcept { return voxels_; }
  const std::vector<T>& voxels() const noexcept { return voxels_; }

  bool operator==(const Grid3& other) const {
    return geometry_.extents == other.geometry_.extents && voxels_ == other.voxels_;
  }

 private:
  Geometry geometry_;
  std::vector<T> voxels_;
};

/// Binary volume on a Volume3D lattice; values are 0 or 1.
using Mask3D = Grid3<std::uint8_t>;
/// Derived real-valued map (distances, energies).
using RealGrid = Grid3<double>;

/// Scalar image carrier; values are finite 64-bit reals after intensity scaling.
class Volume3D : public Grid3<double> {
 public:
  Volume3D() = default;
  explicit Volume3D(Geometry geometry, double fill = 0.0, Modality modality = Modality::Unknown)
      : Grid3<double>(std::move(geometry), fill), modality_(modality) {}
  Volume3D(Geometry geometry, std::vector<double> voxels, Modality modality = Modality::Unknown)
      : Grid3<double>(std::move(geometry), std::move(voxels)), modality_(modality) {}

  Modality modality() const noexcept { return modality_; }
  void set_modality(Modality m) noexcept { modality_ = m; }

 private:
  Modality modality_ = Modality::Unknown;
};

inline std::size_t count_nonzero(const Mask3D& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

inline void require_same_grid(const Geometry& a, const Geometry& b, const char* what) {
  if (!a.same_grid(b)) throw Error(ErrorCode::GridMismatch, what);
}

Modality parse_modality(std::string_view text);
std::string_view to_string(Modality m) noexcept;

}  // namespace volprep
