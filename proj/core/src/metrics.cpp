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

#include "volprep/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "volprep/morphology.hpp"

namespace volprep {

double dice(const Mask3D& a, const Mask3D& b) {
  if (a.extents() != b.extents()) throw Error(ErrorCode::GridMismatch, "dice operands on different grids");
  std::size_t na = 0;
  std::size_t nb = 0;
  std::size_t both = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const bool x = a[n] != 0;
    const bool y = b[n] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> directed_surface_distances(const Mask3D& from, const Mask3D& to, const Vec3& spacing) {
  const Mask3D from_surface = extract_surface(from);
  const RealGrid dist = distance_transform(extract_surface(to), spacing);
  std::vector<double> out;
  for (std::size_t n = 0; n < from_surface.size(); ++n)
    if (from_surface[n]) out.push_back(dist[n]);
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of no values");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

std::optional<double> hd95(const Mask3D& a, const Mask3D& b, const Vec3& spacing) {
  if (a.extents() != b.extents()) throw Error(ErrorCode::GridMismatch, "hd95 operands on different grids");
  if (count_nonzero(a) == 0 || count_nonzero(b) == 0) return std::nullopt;
  const double ab = nearest_rank_percentile(directed_surface_distances(a, b, spacing), 95.0);
  const double ba = nearest_rank_percentile(directed_surface_distances(b, a, spacing), 95.0);
  return std::max(ab, ba);
}

double linear_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of no values");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

StatsSummary summarize(std::vector<double> values, std::size_t n_undefined) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "no values to summarize");
  std::sort(values.begin(), values.end());
  StatsSummary s;
  s.n = values.size() + n_undefined;
  s.n_undefined = n_undefined;
  const double count = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / count;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / count);
  s.median = linear_quantile(values, 0.5);
  s.q1 = linear_quantile(values, 0.25);
  s.q3 = linear_quantile(values, 0.75);
  const double iqr = s.q3 - s.q1;
  const double fence_lo = s.q1 - 1.5 * iqr;
  const double fence_hi = s.q3 + 1.5 * iqr;
  s.whisker_lo = *std::find_if(values.begin(), values.end(), [&](double v) { return v >= fence_lo; });
  s.whisker_hi = *std::find_if(values.rbegin(), values.rend(), [&](double v) { return v <= fence_hi; });
  return s;
}

StatsSummary aggregate_stats(const std::vector<SegMetrics>& cases, MetricField field) {
  if (cases.empty()) throw Error(ErrorCode::EmptyInput, "no cases to aggregate");
  std::vector<double> values;
  std::size_t undefined = 0;
  for (const auto& c : cases) {
    if (field == MetricField::Dice) {
      values.push_back(c.dice);
    } else if (c.hd95_mm) {
      values.push_back(*c.hd95_mm);
    } else {
      ++undefined;
    }
  }
  if (values.empty()) throw Error(ErrorCode::AllUndefined, "every case has undefined HD95");
  return summarize(std::move(values), undefined);
}

SegMetrics evaluate_case(std::string case_id, const Mask3D& prediction, const Mask3D& reference) {
  SegMetrics m;
  m.case_id = std::move(case_id);
  m.dice = dice(prediction, reference);
  m.hd95_mm = hd95(prediction, reference, reference.spacing());
  return m;
}

}  // namespace volprep
