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

#include "volprep/anon_detect.hpp"

#include <algorithm>
#include <cmath>

#include "volprep/anon_sim.hpp"
#include "volprep/foreground.hpp"
#include "volprep/morphology.hpp"

namespace volprep {

namespace {

// Box mean along one axis over [p - r, p + r] clipped to the lattice.
void box_mean_axis(const std::vector<double>& src, std::vector<double>& dst, const Extents& e, std::size_t axis,
                   std::int64_t r) {
  const std::array<std::size_t, 3> strides{1, e.nx, e.nx * e.ny};
  const std::size_t stride = strides[axis];
  const auto n = static_cast<std::int64_t>(e[axis]);
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1);
  for (std::size_t start = 0; start < e.count(); ++start) {
    if ((start / stride) % e[axis] != 0) continue;
    prefix[0] = 0.0;
    for (std::int64_t t = 0; t < n; ++t)
      prefix[static_cast<std::size_t>(t) + 1] = prefix[static_cast<std::size_t>(t)] + src[start + static_cast<std::size_t>(t) * stride];
    for (std::int64_t t = 0; t < n; ++t) {
      const std::int64_t lo = std::max<std::int64_t>(0, t - r);
      const std::int64_t hi = std::min<std::int64_t>(n - 1, t + r);
      dst[start + static_cast<std::size_t>(t) * stride] =
          (prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)]) / static_cast<double>(hi - lo + 1);
    }
  }
}

Mask3D keep_large_components(const Mask3D& mask, std::size_t min_size, const Mask3D* must_touch) {
  const LabeledComponents cc = connected_components(mask, Connectivity::Face6);
  std::vector<std::uint8_t> touches(cc.count + 1, must_touch ? 0 : 1);
  if (must_touch)
    for (std::size_t n = 0; n < mask.size(); ++n)
      if ((*must_touch)[n] && cc.labels[n] > 0) touches[static_cast<std::size_t>(cc.labels[n])] = 1;
  Mask3D out(mask.geometry(), 0);
  for (std::size_t n = 0; n < mask.size(); ++n) {
    const auto l = static_cast<std::size_t>(cc.labels[n]);
    if (l > 0 && touches[l] && cc.sizes[l] >= min_size) out[n] = 1;
  }
  return out;
}

constexpr std::size_t kMinReferenceVoxels = 1000;

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  return values[mid];
}

// Deviation of each voxel from the mean of its in-lattice Face6 neighbours.
std::vector<double> neighbour_deviation(const Grid3<double>& vol) {
  const auto& e = vol.extents();
  const std::array<std::size_t, 3> strides{1, e.nx, e.nx * e.ny};
  std::vector<double> dev(vol.size(), 0.0);
  for (std::size_t n = 0; n < vol.size(); ++n) {
    const Index3 p = vol.coords(n);
    double sum = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < 3; ++a) {
      if (p[a] > 0) {
        sum += vol[n - strides[a]];
        ++count;
      }
      if (p[a] + 1 < static_cast<std::int64_t>(e[a])) {
        sum += vol[n + strides[a]];
        ++count;
      }
    }
    if (count > 0) dev[n] = vol[n] - sum / count;
  }
  return dev;
}

}  // namespace

void DetectionParams::validate() const {
  if (!(zero_tolerance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "zero_tolerance must be >= 0");
  if (blur_window_vox < 3 || blur_window_vox % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "blur_window_vox must be odd and >= 3");
  if (!(blur_ratio_threshold > 0.0 && blur_ratio_threshold < 1.0))
    throw Error(ErrorCode::InvalidArgument, "blur_ratio_threshold must lie in (0, 1)");
  if (!(boundary_growth_vox >= 0.0)) throw Error(ErrorCode::InvalidArgument, "boundary_growth_vox must be >= 0");
  if (!(reference_depth_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "reference_depth_mm must be >= 0");
  if (!(envelope_radius_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "envelope_radius_mm must be >= 0");
}

std::string_view to_string(ModeGuess m) noexcept {
  switch (m) {
    case ModeGuess::None: return "None";
    case ModeGuess::DefaceLike: return "DefaceLike";
    case ModeGuess::BlurLike: return "BlurLike";
    case ModeGuess::Mixed: return "Mixed";
  }
  return "None";
}

Mask3D detect_zero_regions(const Volume3D& vol, const Mask3D& head_mask, const DetectionParams& params) {
  params.validate();
  require_same_grid(vol.geometry(), head_mask.geometry(), "head mask and volume on different grids");
  if (count_nonzero(head_mask) == 0) throw Error(ErrorCode::EmptyHeadMask, "head mask is empty");

  Mask3D zeros(vol.geometry(), 0);
  for (std::size_t n = 0; n < vol.size(); ++n) zeros[n] = std::abs(vol[n]) <= params.zero_tolerance ? 1 : 0;
  if (count_nonzero(zeros) == 0) return zeros;

  const Mask3D near_head = dilate(head_mask, StructuringElement::ball(2.0));
  Mask3D envelope = head_mask;
  if (params.envelope_radius_mm > 0.0) {
    const auto se = StructuringElement::ball_mm(params.envelope_radius_mm, vol.spacing());
    envelope = mask_or(envelope, binary_morph(head_mask, MorphOp::Close, se, Border::Replicate));
  }
  const Mask3D air = border_connected(mask_minus(zeros, envelope));
  return keep_large_components(mask_minus(zeros, air), params.min_zero_region_vox, &near_head);
}

RealGrid blur_energy_map(const Grid3<double>& vol, int window_vox) {
  if (window_vox < 3 || window_vox % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 3");
  const auto& e = vol.extents();
  const Vec3& sp = vol.spacing();
  std::vector<double> grad(vol.size(), 0.0);
  const std::array<std::size_t, 3> strides{1, e.nx, e.nx * e.ny};
  for (std::size_t n = 0; n < vol.size(); ++n) {
    const Index3 p = vol.coords(n);
    double g2 = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      const auto len = static_cast<std::int64_t>(e[a]);
      if (len < 2) continue;
      double d;
      if (p[a] == 0) {
        d = (vol[n + strides[a]] - vol[n]) / sp[a];
      } else if (p[a] == len - 1) {
        d = (vol[n] - vol[n - strides[a]]) / sp[a];
      } else {
        d = (vol[n + strides[a]] - vol[n - strides[a]]) / (2.0 * sp[a]);
      }
      g2 += d * d;
    }
    grad[n] = g2;
  }
  const std::int64_t r = window_vox / 2;
  std::vector<double> tmp(grad.size());
  for (std::size_t a = 0; a < 3; ++a) {
    box_mean_axis(grad, tmp, e, a, r);
    grad.swap(tmp);
  }
  return RealGrid(vol.geometry(), std::move(grad));
}

RealGrid noise_energy_map(const Grid3<double>& vol, int window_vox) {
  if (window_vox < 3 || window_vox % 2 == 0)
    throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 3");
  std::vector<double> dev = neighbour_deviation(vol);
  for (auto& d : dev) d *= d;
  const std::int64_t r = window_vox / 2;
  std::vector<double> tmp(dev.size());
  for (std::size_t a = 0; a < 3; ++a) {
    box_mean_axis(dev, tmp, vol.extents(), a, r);
    dev.swap(tmp);
  }
  return RealGrid(vol.geometry(), std::move(dev));
}

Mask3D detect_blur_regions(const Volume3D& vol, const Mask3D& head_mask, const Mask3D& exclude,
                           const DetectionParams& params) {
  params.validate();
  require_same_grid(vol.geometry(), head_mask.geometry(), "head mask and volume on different grids");
  if (count_nonzero(head_mask) == 0) throw Error(ErrorCode::EmptyHeadMask, "head mask is empty");

  const Mask3D near_head = dilate(head_mask, StructuringElement::ball(2.0));
  const Mask3D domain = mask_minus(near_head, exclude);

  const RealGrid energy = noise_energy_map(vol, params.blur_window_vox);

  // Reference noise level from deep tissue: thin superficial layers are all
  // edges, and only the face cap of any scheme reaches this deep.
  Mask3D deep = mask_minus(
      erode(head_mask, StructuringElement::ball_mm(params.reference_depth_mm, vol.spacing())), exclude);
  if (count_nonzero(deep) < kMinReferenceVoxels) deep = domain;
  std::vector<double> reference;
  for (std::size_t n = 0; n < vol.size(); ++n)
    if (deep[n]) reference.push_back(energy[n]);
  const double cutoff = params.blur_ratio_threshold * median_of(std::move(reference));

  Mask3D low(vol.geometry(), 0);
  for (std::size_t n = 0; n < vol.size(); ++n) low[n] = (domain[n] && energy[n] < cutoff) ? 1 : 0;

  low = binary_morph(low, MorphOp::Close, StructuringElement::ball(2.0));
  low = keep_large_components(mask_and(low, domain), params.min_zero_region_vox, nullptr);
  // The seam where replaced values meet original ones is itself high-energy,
  // so the low-energy core sits inside the true boundary; grow it back.
  if (params.boundary_growth_vox > 0.0)
    low = mask_and(dilate(low, StructuringElement::ball(params.boundary_growth_vox)), domain);
  return low;
}

DetectionResult detect_anonymization(const Volume3D& vol, const DetectionParams& params) {
  params.validate();
  DetectionResult result;
  const Mask3D head = segment_foreground(vol, ForegroundParams::defaults_for(vol.modality()));

  const Mask3D zero = detect_zero_regions(vol, head, params);
  result.head_mask = mask_or(head, zero);
  // Zero-valued voxels belong to the zero signature whether or not the zero
  // path kept them, so they are never blur candidates.
  Mask3D zero_valued(vol.geometry(), 0);
  for (std::size_t n = 0; n < vol.size(); ++n) zero_valued[n] = std::abs(vol[n]) <= params.zero_tolerance ? 1 : 0;
  const Mask3D blur = mask_minus(detect_blur_regions(vol, result.head_mask, zero_valued, params), zero);
  result.anon_mask = mask_or(zero, blur);
  result.zero_voxels = count_nonzero(zero);
  result.blur_voxels = count_nonzero(blur);

  const std::size_t total = result.zero_voxels + result.blur_voxels;
  if (total == 0) {
    result.mode_guess = ModeGuess::None;
    result.confidence = 0.0;
    return result;
  }
  const double zero_share = static_cast<double>(result.zero_voxels) / static_cast<double>(total);
  if (zero_share >= 0.9) {
    result.mode_guess = ModeGuess::DefaceLike;
  } else if (1.0 - zero_share >= 0.9) {
    result.mode_guess = ModeGuess::BlurLike;
  } else {
    result.mode_guess = ModeGuess::Mixed;
  }

  // Share of the flagged surface lying on or next to the head surface.
  const Mask3D anon_surface = extract_surface(result.anon_mask);
  const Mask3D head_shell = dilate(extract_surface(result.head_mask), StructuringElement::ball(1.0));
  const std::size_t surface = count_nonzero(anon_surface);
  result.confidence = surface == 0 ? 0.0
                                   : static_cast<double>(count_nonzero(mask_and(anon_surface, head_shell))) /
                                         static_cast<double>(surface);
  return result;
}

}  // namespace volprep
