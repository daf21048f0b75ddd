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

#include "volprep/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>

namespace volprep {

namespace {

constexpr double kRadiusSlack = 1e-9;

// A structuring element row: offsets (x_lo..x_hi, dy, dz).
struct Run {
  std::int64_t dy;
  std::int64_t dz;
  std::int64_t x_lo;
  std::int64_t x_hi;
};

std::vector<Run> runs_of(const std::vector<Index3>& offsets) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::int64_t>> rows;
  for (const auto& o : offsets) rows[{o[1], o[2]}].push_back(o[0]);
  std::vector<Run> runs;
  for (auto& [key, xs] : rows) {
    std::sort(xs.begin(), xs.end());
    std::size_t start = 0;
    for (std::size_t n = 1; n <= xs.size(); ++n) {
      if (n == xs.size() || xs[n] != xs[n - 1] + 1) {
        runs.push_back({key.first, key.second, xs[start], xs[n - 1]});
        start = n;
      }
    }
  }
  return runs;
}

Index3 reach_of(const std::vector<Index3>& offsets) {
  Index3 r{0, 0, 0};
  for (const auto& o : offsets)
    for (std::size_t a = 0; a < 3; ++a) r[a] = std::max(r[a], std::abs(o[a]));
  return r;
}

void require_grid(const Mask3D& a, const Mask3D& b) {
  if (a.extents() != b.extents()) throw Error(ErrorCode::GridMismatch, "mask extents differ");
}

enum class Basic { Dilate, Erode };

Mask3D basic_morph(const Mask3D& mask, Basic op, const std::vector<Run>& runs) {
  const auto& e = mask.extents();
  const auto nx = static_cast<std::int64_t>(e.nx);
  const auto ny = static_cast<std::int64_t>(e.ny);
  const auto nz = static_cast<std::int64_t>(e.nz);
  Mask3D out(mask.geometry(), op == Basic::Erode ? 1 : 0);
  if (mask.empty()) return out;

  // prefix[line][x] = number of foreground voxels in [0, x) of that x-line.
  const std::size_t stride = e.nx + 1;
  std::vector<std::uint32_t> prefix(stride * e.ny * e.nz, 0);
  for (std::size_t line = 0; line < e.ny * e.nz; ++line) {
    const std::uint8_t* row = mask.data().data() + line * e.nx;
    std::uint32_t* p = prefix.data() + line * stride;
    for (std::size_t x = 0; x < e.nx; ++x) p[x + 1] = p[x] + (row[x] != 0);
  }

  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      std::uint8_t* orow = out.data().data() + static_cast<std::size_t>((z * ny + y) * nx);
      for (const Run& run : runs) {
        const std::int64_t sy = y + run.dy;
        const std::int64_t sz = z + run.dz;
        const bool inside = sy >= 0 && sy < ny && sz >= 0 && sz < nz;
        if (!inside) {
          if (op == Basic::Erode) std::fill(orow, orow + nx, 0);
          continue;
        }
        const std::uint32_t* p = prefix.data() + static_cast<std::size_t>(sz * ny + sy) * stride;
        for (std::int64_t x = 0; x < nx; ++x) {
          const std::int64_t lo = x + run.x_lo;
          const std::int64_t hi = x + run.x_hi;
          if (op == Basic::Dilate) {
            if (orow[x]) continue;
            const std::int64_t clo = std::max<std::int64_t>(lo, 0);
            const std::int64_t chi = std::min<std::int64_t>(hi, nx - 1);
            if (clo <= chi && p[chi + 1] > p[clo]) orow[x] = 1;
          } else {
            if (!orow[x]) continue;
            if (lo < 0 || hi >= nx || p[hi + 1] - p[lo] != static_cast<std::uint32_t>(hi - lo + 1)) orow[x] = 0;
          }
        }
      }
    }
  }
  return out;
}

Mask3D pad_replicate(const Mask3D& mask, const Index3& pad) {
  const auto& e = mask.extents();
  const Extents pe{e.nx + 2 * static_cast<std::size_t>(pad[0]), e.ny + 2 * static_cast<std::size_t>(pad[1]),
                   e.nz + 2 * static_cast<std::size_t>(pad[2])};
  Mask3D out(Geometry(pe, mask.spacing()));
  auto clampi = [](std::int64_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::int64_t>(v, 0, static_cast<std::int64_t>(n) - 1));
  };
  for (std::size_t k = 0; k < pe.nz; ++k) {
    const auto sk = clampi(static_cast<std::int64_t>(k) - pad[2], e.nz);
    for (std::size_t j = 0; j < pe.ny; ++j) {
      const auto sj = clampi(static_cast<std::int64_t>(j) - pad[1], e.ny);
      for (std::size_t i = 0; i < pe.nx; ++i) {
        const auto si = clampi(static_cast<std::int64_t>(i) - pad[0], e.nx);
        out(i, j, k) = mask(si, sj, sk);
      }
    }
  }
  return out;
}

Mask3D crop(const Mask3D& padded, const Index3& pad, const Geometry& geometry) {
  Mask3D out(geometry);
  const auto& e = geometry.extents;
  for (std::size_t k = 0; k < e.nz; ++k)
    for (std::size_t j = 0; j < e.ny; ++j)
      for (std::size_t i = 0; i < e.nx; ++i)
        out(i, j, k) = padded(i + static_cast<std::size_t>(pad[0]), j + static_cast<std::size_t>(pad[1]),
                              k + static_cast<std::size_t>(pad[2]));
  return out;
}

template <typename Visit>
void for_each_neighbor(const Index3& p, const Extents& e, Connectivity c, Visit&& visit) {
  for (std::int64_t dz = -1; dz <= 1; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const int manhattan = static_cast<int>(std::abs(dx) + std::abs(dy) + std::abs(dz));
        if (manhattan == 0) continue;
        if (c == Connectivity::Face6 && manhattan != 1) continue;
        const std::int64_t x = p[0] + dx;
        const std::int64_t y = p[1] + dy;
        const std::int64_t z = p[2] + dz;
        if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::int64_t>(e.nx) ||
            y >= static_cast<std::int64_t>(e.ny) || z >= static_cast<std::int64_t>(e.nz))
          continue;
        visit(static_cast<std::size_t>(x) + e.nx * (static_cast<std::size_t>(y) + e.ny * static_cast<std::size_t>(z)));
      }
}

bool on_border(const Index3& p, const Extents& e) {
  for (std::size_t a = 0; a < 3; ++a)
    if (p[a] == 0 || static_cast<std::size_t>(p[a]) + 1 == e[a]) return true;
  return false;
}

// Lower-envelope squared distance along one line with sample pitch `step`.
// f holds squared distances (inf = no site); results overwrite f.
void envelope_1d(std::vector<double>& f, double step, std::vector<std::size_t>& v, std::vector<double>& z,
                 std::vector<double>& out) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.resize(n);
  z.resize(n + 1);
  out.resize(n);
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      any = true;
      continue;
    }
    const double pq = static_cast<double>(q) * step;
    while (true) {
      const double pv = static_cast<double>(v[k]) * step;
      const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
      if (k > 0 && s <= z[k]) {
        --k;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
      break;
    }
  }
  if (!any) return;
  k = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double pp = static_cast<double>(p) * step;
    while (z[k + 1] < pp) ++k;
    const double d = (static_cast<double>(p) - static_cast<double>(v[k])) * step;
    out[p] = f[v[k]] + d * d;
  }
  f.swap(out);
}

}  // namespace

StructuringElement::StructuringElement(Shape shape, std::vector<Index3> offsets, std::optional<Metric> metric)
    : shape_(shape), offsets_(std::move(offsets)), reach_(reach_of(offsets_)), metric_(std::move(metric)) {}

StructuringElement StructuringElement::ball(const Vec3& radii_vox) {
  for (double r : radii_vox)
    if (!(r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ball radius must be >= 0");
  Index3 reach{};
  for (std::size_t a = 0; a < 3; ++a) reach[a] = static_cast<std::int64_t>(std::floor(radii_vox[a] + kRadiusSlack));
  std::vector<Index3> offsets;
  for (std::int64_t dz = -reach[2]; dz <= reach[2]; ++dz)
    for (std::int64_t dy = -reach[1]; dy <= reach[1]; ++dy)
      for (std::int64_t dx = -reach[0]; dx <= reach[0]; ++dx) {
        const Index3 o{dx, dy, dz};
        double q = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
          if (o[a] == 0) continue;
          const double t = static_cast<double>(o[a]) / radii_vox[a];
          q += t * t;
        }
        if (q <= 1.0 + kRadiusSlack) offsets.push_back(o);
      }
  std::optional<Metric> metric;
  if (radii_vox[0] > 0.0 && radii_vox[1] > 0.0 && radii_vox[2] > 0.0)
    metric = Metric{{1.0 / radii_vox[0], 1.0 / radii_vox[1], 1.0 / radii_vox[2]}, 1.0};
  return StructuringElement(Shape::Ball, std::move(offsets), metric);
}

StructuringElement StructuringElement::ball_mm(double radius_mm, const Vec3& spacing) {
  if (!(radius_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ball radius must be >= 0");
  Index3 reach{};
  for (std::size_t a = 0; a < 3; ++a)
    reach[a] = static_cast<std::int64_t>(std::floor(radius_mm / spacing[a] + kRadiusSlack));
  const double r2 = radius_mm * radius_mm;
  std::vector<Index3> offsets;
  for (std::int64_t dz = -reach[2]; dz <= reach[2]; ++dz)
    for (std::int64_t dy = -reach[1]; dy <= reach[1]; ++dy)
      for (std::int64_t dx = -reach[0]; dx <= reach[0]; ++dx) {
        const double x = static_cast<double>(dx) * spacing[0];
        const double y = static_cast<double>(dy) * spacing[1];
        const double z = static_cast<double>(dz) * spacing[2];
        if (x * x + y * y + z * z <= r2 * (1.0 + kRadiusSlack)) offsets.push_back({dx, dy, dz});
      }
  return StructuringElement(Shape::Ball, std::move(offsets), Metric{spacing, radius_mm});
}

StructuringElement StructuringElement::box(const Index3& half_extent) {
  for (auto h : half_extent)
    if (h < 0) throw Error(ErrorCode::InvalidArgument, "box half extent must be >= 0");
  std::vector<Index3> offsets;
  for (std::int64_t dz = -half_extent[2]; dz <= half_extent[2]; ++dz)
    for (std::int64_t dy = -half_extent[1]; dy <= half_extent[1]; ++dy)
      for (std::int64_t dx = -half_extent[0]; dx <= half_extent[0]; ++dx) offsets.push_back({dx, dy, dz});
  return StructuringElement(Shape::Box, std::move(offsets));
}

StructuringElement StructuringElement::from_offsets(std::vector<Index3> offsets) {
  std::set<Index3> unique(offsets.begin(), offsets.end());
  if (!unique.count(Index3{0, 0, 0}))
    throw Error(ErrorCode::InvalidArgument, "structuring element must contain the origin");
  for (const auto& o : unique)
    if (!unique.count(Index3{-o[0], -o[1], -o[2]}))
      throw Error(ErrorCode::InvalidArgument, "structuring element must be symmetric");
  return StructuringElement(Shape::Custom, std::vector<Index3>(unique.begin(), unique.end()));
}

namespace {

// Elements this large are cheaper through the distance transform.
constexpr std::size_t kMetricPathMinOffsets = 400;

Mask3D metric_dilate(const Mask3D& mask, const StructuringElement::Metric& m) {
  if (count_nonzero(mask) == 0) return Mask3D(mask.geometry(), 0);
  const RealGrid d2 = squared_distance_transform(mask, m.scale);
  const double limit = m.radius * m.radius * (1.0 + kRadiusSlack);
  Mask3D out(mask.geometry(), 0);
  for (std::size_t n = 0; n < mask.size(); ++n) out[n] = d2[n] <= limit ? 1 : 0;
  return out;
}

// Erosion with the lattice exterior as background: pad the complement by
// the reach so exterior voxels act as background seeds.
Mask3D metric_erode(const Mask3D& mask, const StructuringElement::Metric& m, const Index3& reach) {
  const auto& e = mask.extents();
  const Extents pe{e.nx + 2 * static_cast<std::size_t>(reach[0]), e.ny + 2 * static_cast<std::size_t>(reach[1]),
                   e.nz + 2 * static_cast<std::size_t>(reach[2])};
  Mask3D background(Geometry(pe, mask.spacing()), 1);
  for (std::size_t k = 0; k < e.nz; ++k)
    for (std::size_t j = 0; j < e.ny; ++j)
      for (std::size_t i = 0; i < e.nx; ++i)
        background(i + static_cast<std::size_t>(reach[0]), j + static_cast<std::size_t>(reach[1]),
                   k + static_cast<std::size_t>(reach[2])) = mask(i, j, k) ? 0 : 1;
  Mask3D out(mask.geometry(), 0);
  if (count_nonzero(background) == 0) {
    std::fill(out.voxels().begin(), out.voxels().end(), 1);
    return out;
  }
  const RealGrid d2 = squared_distance_transform(background, m.scale);
  const double limit = m.radius * m.radius * (1.0 + kRadiusSlack);
  for (std::size_t k = 0; k < e.nz; ++k)
    for (std::size_t j = 0; j < e.ny; ++j)
      for (std::size_t i = 0; i < e.nx; ++i)
        out(i, j, k) = d2(i + static_cast<std::size_t>(reach[0]), j + static_cast<std::size_t>(reach[1]),
                          k + static_cast<std::size_t>(reach[2])) > limit
                           ? 1
                           : 0;
  return out;
}

// `erode_pad` is how far erosion must see exterior background; zero when
// the caller crops away everything that could see the lattice edge.
Mask3D morph_in_lattice(const Mask3D& mask, MorphOp op, const StructuringElement& se, const Index3& erode_pad) {
  if (se.metric() && se.offsets().size() >= kMetricPathMinOffsets) {
    const auto& m = *se.metric();
    const Index3& reach = erode_pad;
    switch (op) {
      case MorphOp::Dilate: return metric_dilate(mask, m);
      case MorphOp::Erode: return metric_erode(mask, m, reach);
      case MorphOp::Open: return metric_dilate(metric_erode(mask, m, reach), m);
      case MorphOp::Close: return metric_erode(metric_dilate(mask, m), m, reach);
    }
  }
  const auto runs = runs_of(se.offsets());
  switch (op) {
    case MorphOp::Dilate: return basic_morph(mask, Basic::Dilate, runs);
    case MorphOp::Erode: return basic_morph(mask, Basic::Erode, runs);
    case MorphOp::Open: return basic_morph(basic_morph(mask, Basic::Erode, runs), Basic::Dilate, runs);
    case MorphOp::Close: return basic_morph(basic_morph(mask, Basic::Dilate, runs), Basic::Erode, runs);
  }
  return mask;
}

}  // namespace

Mask3D binary_morph(const Mask3D& mask, MorphOp op, const StructuringElement& se, Border border) {
  if (border == Border::Replicate) {
    const Index3 pad = se.reach();
    // Opening and closing chain two passes, each reaching `pad` further.
    const Index3 total = (op == MorphOp::Open || op == MorphOp::Close) ? Index3{2 * pad[0], 2 * pad[1], 2 * pad[2]} : pad;
    const Mask3D padded = pad_replicate(mask, total);
    // No cropped-back voxel sees past the padded lattice.
    return crop(morph_in_lattice(padded, op, se, Index3{0, 0, 0}), total, mask.geometry());
  }
  return morph_in_lattice(mask, op, se, se.reach());
}

LabeledComponents connected_components(const Mask3D& mask, Connectivity connectivity) {
  LabeledComponents result;
  result.labels = Grid3<std::int32_t>(mask.geometry(), 0);
  result.sizes.push_back(0);
  const auto& e = mask.extents();
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || result.labels[seed] != 0) continue;
    const auto label = static_cast<std::int32_t>(++result.count);
    std::size_t size = 0;
    result.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      for_each_neighbor(mask.coords(cur), e, connectivity, [&](std::size_t nb) {
        if (mask[nb] && result.labels[nb] == 0) {
          result.labels[nb] = label;
          stack.push_back(nb);
        }
      });
    }
    result.sizes.push_back(size);
  }
  return result;
}

Mask3D border_connected(const Mask3D& mask) {
  Mask3D reached(mask.geometry(), 0);
  const auto& e = mask.extents();
  std::vector<std::size_t> stack;
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (!mask[n] || reached[n] || !on_border(mask.coords(n), e)) continue;
    reached[n] = 1;
    stack.push_back(n);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for_each_neighbor(mask.coords(cur), e, Connectivity::Face6, [&](std::size_t nb) {
        if (mask[nb] && !reached[nb]) {
          reached[nb] = 1;
          stack.push_back(nb);
        }
      });
    }
  }
  return reached;
}

Mask3D fill_holes(const Mask3D& mask) {
  const Mask3D outside = border_connected(mask_not(mask));
  Mask3D out(mask.geometry(), 0);
  for (std::size_t n = 0; n < mask.size(); ++n) out[n] = outside[n] ? 0 : 1;
  return out;
}

Mask3D extract_surface(const Mask3D& mask) {
  Mask3D out(mask.geometry(), 0);
  const auto& e = mask.extents();
  for (std::size_t n = 0; n < mask.size(); ++n) {
    if (!mask[n]) continue;
    const Index3 p = mask.coords(n);
    if (on_border(p, e)) {
      out[n] = 1;
      continue;
    }
    bool exposed = false;
    for_each_neighbor(p, e, Connectivity::Face6, [&](std::size_t nb) { exposed = exposed || !mask[nb]; });
    out[n] = exposed ? 1 : 0;
  }
  return out;
}

RealGrid squared_distance_transform(const Mask3D& mask, const Vec3& spacing) {
  if (count_nonzero(mask) == 0) throw Error(ErrorCode::EmptyMask, "distance transform of an empty mask");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& e = mask.extents();
  RealGrid dist(mask.geometry(), inf);
  for (std::size_t n = 0; n < mask.size(); ++n)
    if (mask[n]) dist[n] = 0.0;

  std::vector<double> line;
  std::vector<std::size_t> v;
  std::vector<double> z;
  std::vector<double> scratch;
  const std::array<std::size_t, 3> strides{1, e.nx, e.nx * e.ny};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t n = e[axis];
    const std::size_t stride = strides[axis];
    line.resize(n);
    // Lines parallel to `axis` start at the voxels whose `axis` index is 0.
    const std::size_t other_a = axis == 0 ? 1 : 0;
    const std::size_t other_b = axis == 2 ? 1 : 2;
    for (std::size_t b = 0; b < e[other_b]; ++b) {
      for (std::size_t a = 0; a < e[other_a]; ++a) {
        const std::size_t start = a * strides[other_a] + b * strides[other_b];
        for (std::size_t t = 0; t < n; ++t) line[t] = dist[start + t * stride];
        envelope_1d(line, spacing[axis], v, z, scratch);
        for (std::size_t t = 0; t < n; ++t) dist[start + t * stride] = line[t];
      }
    }
  }
  return dist;
}

RealGrid distance_transform(const Mask3D& mask, const Vec3& spacing) {
  RealGrid dist = squared_distance_transform(mask, spacing);
  for (auto& d : dist.voxels()) d = std::sqrt(d);
  return dist;
}

Mask3D mask_and(const Mask3D& a, const Mask3D& b) {
  require_grid(a, b);
  Mask3D out(a.geometry(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = (a[n] && b[n]) ? 1 : 0;
  return out;
}

Mask3D mask_or(const Mask3D& a, const Mask3D& b) {
  require_grid(a, b);
  Mask3D out(a.geometry(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = (a[n] || b[n]) ? 1 : 0;
  return out;
}

Mask3D mask_minus(const Mask3D& a, const Mask3D& b) {
  require_grid(a, b);
  Mask3D out(a.geometry(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = (a[n] && !b[n]) ? 1 : 0;
  return out;
}

Mask3D mask_not(const Mask3D& a) {
  Mask3D out(a.geometry(), 0);
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] ? 0 : 1;
  return out;
}

bool is_subset(const Mask3D& a, const Mask3D& b) {
  require_grid(a, b);
  for (std::size_t n = 0; n < a.size(); ++n)
    if (a[n] && !b[n]) return false;
  return true;
}

}  // namespace volprep
