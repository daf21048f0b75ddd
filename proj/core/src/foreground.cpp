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

#include "volprep/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <vector>

#include "volprep/morphology.hpp"
#include "volprep/volume_core.hpp"

namespace volprep {

ForegroundParams ForegroundParams::defaults_for(Modality modality) {
  ForegroundParams p;
  if (modality == Modality::CT) {
    p.threshold_mode = ThresholdMode::FixedCT;
    p.threshold_value = -500.0;
  }
  return p;
}

void ForegroundParams::validate() const {
  if (!(closing_radius_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "closing_radius_mm must be >= 0");
  if (!(min_component_fraction > 0.0 && min_component_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "min_component_fraction must lie in (0, 1]");
  if (threshold_mode != ThresholdMode::Otsu && !std::isfinite(threshold_value))
    throw Error(ErrorCode::InvalidArgument, "threshold value must be finite");
}

double otsu_threshold(const Volume3D& vol, const Mask3D* exclude) {
  if (exclude && exclude->extents() != vol.extents())
    throw Error(ErrorCode::GridMismatch, "exclusion mask on a different grid");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < vol.size(); ++n) {
    if (exclude && (*exclude)[n]) continue;
    lo = std::min(lo, vol[n]);
    hi = std::max(hi, vol[n]);
  }
  if (!(hi > lo)) throw Error(ErrorCode::DegenerateVolume, "fewer than two distinct intensities");

  std::array<double, kHistogramBins> hist{};
  for (std::size_t n = 0; n < vol.size(); ++n) {
    if (exclude && (*exclude)[n]) continue;
    hist[histogram_bin(vol[n], lo, hi)] += 1.0;
  }
  double total = 0.0;
  double total_moment = 0.0;
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    total += hist[b];
    total_moment += static_cast<double>(b) * hist[b];
  }

  // Between-class variance w0 * w1 * (mu0 - mu1)^2 for a cut after bin k.
  double best = -1.0;
  std::size_t best_k = 0;
  double w0 = 0.0;
  double m0 = 0.0;
  for (std::size_t k = 0; k + 1 < kHistogramBins; ++k) {
    w0 += hist[k];
    m0 += static_cast<double>(k) * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = m0 / w0;
    const double mu1 = (total_moment - m0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best * (1.0 + 1e-12)) {
      best = var;
      best_k = k;
    }
  }

  double lower_max = -std::numeric_limits<double>::infinity();
  double upper_min = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < vol.size(); ++n) {
    if (exclude && (*exclude)[n]) continue;
    if (histogram_bin(vol[n], lo, hi) <= best_k) {
      lower_max = std::max(lower_max, vol[n]);
    } else {
      upper_min = std::min(upper_min, vol[n]);
    }
  }
  return 0.5 * (lower_max + upper_min);
}

PaddingReport detect_constant_padding(const Volume3D& vol) {
  PaddingReport report;
  report.padding_mask = Mask3D(vol.geometry(), 0);
  if (vol.empty()) return report;

  const auto min_count = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(kPaddingMinOccupancy * static_cast<double>(vol.size()))));
  // Only values present on the lattice border can be border-connected.
  std::unordered_map<double, std::size_t> counts;
  const auto& e = vol.extents();
  for (std::size_t k = 0; k < e.nz; ++k)
    for (std::size_t j = 0; j < e.ny; ++j) {
      const bool face = k == 0 || k + 1 == e.nz || j == 0 || j + 1 == e.ny;
      const std::size_t step = face || e.nx < 2 ? 1 : e.nx - 1;
      for (std::size_t i = 0; i < e.nx; i += step) counts.emplace(vol(i, j, k) + 0.0, 0);
    }
  for (double v : vol.data()) {
    const auto it = counts.find(v);
    if (it != counts.end()) ++it->second;
  }
  std::vector<double> candidates;
  for (const auto& [value, count] : counts)
    if (count >= min_count) candidates.push_back(value);
  std::sort(candidates.begin(), candidates.end());

  for (double value : candidates) {
    Mask3D level(vol.geometry(), 0);
    for (std::size_t n = 0; n < vol.size(); ++n) level[n] = vol[n] == value ? 1 : 0;
    const Mask3D touching = border_connected(level);
    const std::size_t hits = count_nonzero(touching);
    if (hits == 0) continue;
    report.padding_values.push_back(value);
    report.padding_mask = mask_or(report.padding_mask, touching);
  }
  report.padded_fraction =
      static_cast<double>(count_nonzero(report.padding_mask)) / static_cast<double>(vol.size());
  return report;
}

Mask3D select_components(const Mask3D& mask, KeepComponents policy, double min_component_fraction) {
  const LabeledComponents cc = connected_components(mask, Connectivity::Full26);
  Mask3D out(mask.geometry(), 0);
  if (cc.count == 0) return out;
  std::size_t largest = 1;
  for (std::size_t l = 2; l <= cc.count; ++l)
    if (cc.sizes[l] > cc.sizes[largest]) largest = l;
  std::vector<std::uint8_t> keep(cc.count + 1, 0);
  if (policy == KeepComponents::Largest) {
    keep[largest] = 1;
  } else {
    const double floor_size = min_component_fraction * static_cast<double>(cc.sizes[largest]);
    for (std::size_t l = 1; l <= cc.count; ++l) keep[l] = static_cast<double>(cc.sizes[l]) >= floor_size ? 1 : 0;
  }
  for (std::size_t n = 0; n < mask.size(); ++n) out[n] = keep[static_cast<std::size_t>(cc.labels[n])];
  return out;
}

ForegroundResult segment_foreground_detailed(const Volume3D& vol, const ForegroundParams& params) {
  params.validate();
  if (vol.empty()) throw Error(ErrorCode::DegenerateVolume, "empty volume");
  const auto [lo, hi] = std::minmax_element(vol.data().begin(), vol.data().end());
  if (!(*hi > *lo)) throw Error(ErrorCode::DegenerateVolume, "constant volume");

  ForegroundResult result;
  result.padding = detect_constant_padding(vol);
  const Mask3D& padding = result.padding.padding_mask;

  switch (params.threshold_mode) {
    case ThresholdMode::Otsu: result.threshold = otsu_threshold(vol, &padding); break;
    case ThresholdMode::FixedCT:
    case ThresholdMode::Manual: result.threshold = params.threshold_value; break;
  }

  Mask3D mask(vol.geometry(), 0);
  for (std::size_t n = 0; n < vol.size(); ++n) mask[n] = (vol[n] > result.threshold && !padding[n]) ? 1 : 0;

  if (params.closing_radius_mm > 0.0) {
    const auto se = StructuringElement::ball_mm(params.closing_radius_mm, vol.spacing());
    // Replicated border keeps anatomy that runs off the field of view from eroding.
    mask = binary_morph(mask, MorphOp::Close, se, Border::Replicate);
  }
  mask = mask_minus(mask, padding);
  mask = select_components(mask, params.keep_components, params.min_component_fraction);
  mask = mask_minus(fill_holes(mask), padding);

  if (count_nonzero(mask) == 0) throw Error(ErrorCode::EmptyForeground, "no foreground component survived");
  result.mask = std::move(mask);
  return result;
}

}  // namespace volprep
