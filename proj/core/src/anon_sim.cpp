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

#include "volprep/anon_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "volprep/morphology.hpp"

namespace volprep {

namespace {

constexpr double kMaxAxisAngleDeg = 35.0;

struct Bounds {
  std::array<std::int64_t, 3> lo{};
  std::array<std::int64_t, 3> hi{};
};

Bounds bounding_box(const Mask3D& mask) {
  Bounds b;
  b.lo = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
          std::numeric_limits<std::int64_t>::max()};
  b.hi = {-1, -1, -1};
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (!mask[n]) continue;
    const Index3 p = mask.coords(n);
    for (std::size_t a = 0; a < 3; ++a) {
      b.lo[a] = std::min(b.lo[a], p[a]);
      b.hi[a] = std::max(b.hi[a], p[a]);
    }
  }
  return b;
}

// Position of index `i` along an axis as a fraction of the box, measured in
// the direction of `sign`; voxel centers sit at (k + 0.5) / extent.
double axis_fraction(std::int64_t i, std::int64_t lo, std::int64_t hi, int sign) {
  const double extent = static_cast<double>(hi - lo + 1);
  const double from_lo = (static_cast<double>(i - lo) + 0.5) / extent;
  return sign > 0 ? from_lo : 1.0 - from_lo;
}

void blur_axis(const std::vector<double>& src, std::vector<double>& dst, const Extents& e, std::size_t axis,
               const std::vector<double>& kernel) {
  const auto radius = static_cast<std::int64_t>(kernel.size() / 2);
  const std::array<std::size_t, 3> strides{1, e.nx, e.nx * e.ny};
  const std::size_t stride = strides[axis];
  const auto n = static_cast<std::int64_t>(e[axis]);
  // Per-position normalizer for taps that stay on the lattice.
  std::vector<double> norm(static_cast<std::size_t>(n));
  for (std::int64_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (std::int64_t k = -radius; k <= radius; ++k)
      if (p + k >= 0 && p + k < n) s += kernel[static_cast<std::size_t>(k + radius)];
    norm[static_cast<std::size_t>(p)] = s;
  }
  const std::size_t total = e.count();
  for (std::size_t start = 0; start < total; ++start) {
    const std::size_t coord = (start / stride) % e[axis];
    if (coord != 0) continue;
    for (std::int64_t p = 0; p < n; ++p) {
      double acc = 0.0;
      const std::int64_t k_lo = std::max(-radius, -p);
      const std::int64_t k_hi = std::min(radius, n - 1 - p);
      for (std::int64_t k = k_lo; k <= k_hi; ++k)
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[start + static_cast<std::size_t>(p + k) * stride];
      dst[start + static_cast<std::size_t>(p) * stride] = acc / norm[static_cast<std::size_t>(p)];
    }
  }
}

}  // namespace

std::string_view to_string(AnonKind kind) noexcept {
  switch (kind) {
    case AnonKind::Deface: return "deface";
    case AnonKind::Reface: return "reface";
    case AnonKind::RefacePlus: return "reface-plus";
  }
  return "deface";
}

AnonKind parse_anon_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::erase_if(s, [](char c) { return c == '-' || c == '_' || c == ' '; });
  if (s == "deface") return AnonKind::Deface;
  if (s == "reface") return AnonKind::Reface;
  if (s == "refaceplus") return AnonKind::RefacePlus;
  throw Error(ErrorCode::InvalidArgument, "unknown anonymization scheme '" + std::string(text) + "'");
}

void AnonScheme::validate() const {
  if (!(blur_sigma_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "blur_sigma_mm must be > 0");
  if (!(skull_shell_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "skull_shell_mm must be > 0");
}

HeadAxes head_axes(const Affine& affine) {
  std::array<std::size_t, 3> world_of{};
  std::array<int, 3> sign_of{};
  for (std::size_t col = 0; col < 3; ++col) {
    const Vec3 v{affine[0][col], affine[1][col], affine[2][col]};
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(norm > 0.0)) throw Error(ErrorCode::AmbiguousOrientation, "degenerate affine column");
    std::size_t best = 0;
    for (std::size_t w = 1; w < 3; ++w)
      if (std::abs(v[w]) > std::abs(v[best])) best = w;
    const double angle = std::acos(std::min(1.0, std::abs(v[best]) / norm)) * 180.0 / std::numbers::pi;
    if (angle > kMaxAxisAngleDeg)
      throw Error(ErrorCode::AmbiguousOrientation,
                  "voxel axis " + std::to_string(col) + " is " + std::to_string(angle) + " deg from any world axis");
    world_of[col] = best;
    sign_of[col] = v[best] > 0.0 ? 1 : -1;
  }
  if (world_of[0] == world_of[1] || world_of[0] == world_of[2] || world_of[1] == world_of[2])
    throw Error(ErrorCode::AmbiguousOrientation, "two voxel axes map to the same world axis");
  HeadAxes axes;
  for (std::size_t col = 0; col < 3; ++col) {
    switch (world_of[col]) {
      case 0: axes.lateral_axis = col; break;
      case 1:
        axes.anterior_axis = col;
        axes.anterior_sign = sign_of[col];
        break;
      default:
        axes.superior_axis = col;
        axes.superior_sign = sign_of[col];
        break;
    }
  }
  return axes;
}

Mask3D build_face_region(const Mask3D& head_mask, double anterior_fraction, double inferior_fraction,
                         double ear_radius_mm) {
  if (count_nonzero(head_mask) == 0) throw Error(ErrorCode::EmptyHeadMask, "head mask is empty");
  const HeadAxes axes = head_axes(head_mask.affine());
  const Bounds box = bounding_box(head_mask);
  const std::size_t ant = axes.anterior_axis;
  const std::size_t sup = axes.superior_axis;
  const std::size_t lat = axes.lateral_axis;

  Mask3D region(head_mask.geometry(), 0);
  if (anterior_fraction > 0.0 && inferior_fraction > 0.0) {
    for (std::size_t n = 0; n < head_mask.size(); ++n) {
      if (!head_mask[n]) continue;
      const Index3 p = head_mask.coords(n);
      const double t_ant = axis_fraction(p[ant], box.lo[ant], box.hi[ant], axes.anterior_sign);
      const double t_sup = axis_fraction(p[sup], box.lo[sup], box.hi[sup], axes.superior_sign);
      if (t_ant > 1.0 - anterior_fraction && t_sup < inferior_fraction) region[n] = 1;
    }
  }

  if (ear_radius_mm > 0.0) {
    // Mid-height plane; fall back to the nearest populated plane.
    const std::int64_t mid = (box.lo[sup] + box.hi[sup]) / 2;
    std::vector<Index3> plane;
    for (std::int64_t offset = 0; plane.empty() && offset <= box.hi[sup] - box.lo[sup]; ++offset) {
      for (std::int64_t level : {mid - offset, mid + offset}) {
        if (level < box.lo[sup] || level > box.hi[sup]) continue;
        for (std::size_t n = 0; n < head_mask.size(); ++n) {
          if (!head_mask[n]) continue;
          const Index3 p = head_mask.coords(n);
          if (p[sup] == level) plane.push_back(p);
        }
        if (!plane.empty()) break;
      }
    }
    std::int64_t lat_min = std::numeric_limits<std::int64_t>::max();
    std::int64_t lat_max = std::numeric_limits<std::int64_t>::min();
    for (const auto& p : plane) {
      lat_min = std::min(lat_min, p[lat]);
      lat_max = std::max(lat_max, p[lat]);
    }
    const Vec3& sp = head_mask.spacing();
    for (std::int64_t extreme : {lat_min, lat_max}) {
      double ant_sum = 0.0;
      std::size_t ant_count = 0;
      Index3 center{};
      for (const auto& p : plane) {
        if (p[lat] != extreme) continue;
        ant_sum += static_cast<double>(p[ant]);
        ++ant_count;
        center = p;
      }
      center[ant] = static_cast<std::int64_t>(std::llround(ant_sum / static_cast<double>(ant_count)));
      Index3 reach{};
      for (std::size_t a = 0; a < 3; ++a) reach[a] = static_cast<std::int64_t>(std::floor(ear_radius_mm / sp[a]));
      const double r2 = ear_radius_mm * ear_radius_mm;
      for (std::int64_t dz = -reach[2]; dz <= reach[2]; ++dz)
        for (std::int64_t dy = -reach[1]; dy <= reach[1]; ++dy)
          for (std::int64_t dx = -reach[0]; dx <= reach[0]; ++dx) {
            const double x = static_cast<double>(dx) * sp[0];
            const double y = static_cast<double>(dy) * sp[1];
            const double z = static_cast<double>(dz) * sp[2];
            if (x * x + y * y + z * z > r2) continue;
            const std::int64_t i = center[0] + dx;
            const std::int64_t j = center[1] + dy;
            const std::int64_t k = center[2] + dz;
            if (region.contains(i, j, k))
              region(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k)) = 1;
          }
    }
  }

  return mask_and(region, dilate(head_mask, StructuringElement::ball(2.0)));
}

std::vector<double> gaussian_kernel(double sigma_vox) {
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma_vox));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::int64_t t = -radius; t <= radius; ++t) {
    const double w = std::exp(-0.5 * static_cast<double>(t * t) / (sigma_vox * sigma_vox));
    k[static_cast<std::size_t>(t + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

Grid3<double> gaussian_blur(const Grid3<double>& vol, double sigma_mm) {
  if (!(sigma_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_mm must be > 0");
  std::vector<double> a(vol.voxels());
  std::vector<double> b(a.size());
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto kernel = gaussian_kernel(sigma_mm / vol.spacing()[axis]);
    blur_axis(a, b, vol.extents(), axis, kernel);
    a.swap(b);
  }
  return Grid3<double>(vol.geometry(), std::move(a));
}

Volume3D gaussian_blur(const Volume3D& vol, double sigma_mm) {
  Grid3<double> g = gaussian_blur(static_cast<const Grid3<double>&>(vol), sigma_mm);
  return Volume3D(vol.geometry(), std::move(g.voxels()), vol.modality());
}

AnonResult apply_anonymization(const Volume3D& vol, const Mask3D& head_mask, const AnonScheme& scheme,
                               const FaceRegionParams& region_params) {
  scheme.validate();
  require_same_grid(vol.geometry(), head_mask.geometry(), "head mask and volume on different grids");
  if (count_nonzero(head_mask) == 0) throw Error(ErrorCode::EmptyHeadMask, "head mask is empty");

  AnonResult result;
  result.scheme = scheme;
  result.altered_mask = build_face_region(head_mask, region_params);
  if (scheme.kind == AnonKind::RefacePlus) {
    const auto se = StructuringElement::ball_mm(scheme.skull_shell_mm, vol.spacing());
    const Mask3D shell = mask_minus(head_mask, erode(head_mask, se));
    result.altered_mask = mask_or(result.altered_mask, shell);
  }

  result.volume = vol;
  if (scheme.kind == AnonKind::Deface) {
    for (std::size_t n = 0; n < vol.size(); ++n)
      if (result.altered_mask[n]) result.volume[n] = 0.0;
  } else {
    const Volume3D blurred = gaussian_blur(vol, scheme.blur_sigma_mm);
    for (std::size_t n = 0; n < vol.size(); ++n)
      if (result.altered_mask[n]) result.volume[n] = blurred[n];
  }
  return result;
}

}  // namespace volprep
