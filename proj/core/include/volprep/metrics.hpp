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

// Overlap and surface-distance metrics for binary segmentations, and the
// mean / std / median / boxplot aggregates reported over a case list.
//
// Conventions pinned here:
//  * Dice of two empty masks is 1, of exactly one empty mask 0.
//  * HD95 is the larger of the two directed 95th percentiles of
//    surface-to-surface distances, nearest-rank (ceil) percentile.
//  * HD95 with an empty operand is undefined (std::nullopt), never 0.
//  * std is the population standard deviation.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep {

struct SegMetrics {
  std::string case_id;
  double dice = 0.0;
  std::optional<double> hd95_mm;
};

struct StatsSummary {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::size_t n = 0;
  std::size_t n_undefined = 0;
};

enum class MetricField { Dice, HD95 };

double dice(const Mask3D& a, const Mask3D& b);

std::optional<double> hd95(const Mask3D& a, const Mask3D& b, const Vec3& spacing);

/// Directed surface distances: for every surface voxel of `from`, the distance
/// (mm) to the nearest surface voxel of `to`. Both masks must be nonempty.
std::vector<double> directed_surface_distances(const Mask3D& from, const Mask3D& to, const Vec3& spacing);

/// Nearest-rank percentile, q in (0, 100]. `values` need not be sorted.
double nearest_rank_percentile(std::vector<double> values, double q);

/// Quantile by linear interpolation between order statistics (position q*(n-1)).
double linear_quantile(const std::vector<double>& sorted, double q);

StatsSummary summarize(std::vector<double> values, std::size_t n_undefined = 0);

/// Throws EmptyInput for no cases, AllUndefined when every HD95 is undefined.
StatsSummary aggregate_stats(const std::vector<SegMetrics>& cases, MetricField field);

SegMetrics evaluate_case(std::string case_id, const Mask3D& prediction, const Mask3D& reference);

}  // namespace volprep
