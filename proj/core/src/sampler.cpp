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

#include "volprep/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "volprep/philox.hpp"

namespace volprep {

namespace {

// Summed-volume table of the foreground; built only when an overlap rule is active.
class ForegroundCounter {
 public:
  ForegroundCounter(const Mask3D& fg, bool build_table) : fg_(fg) {
    if (!build_table) return;
    const auto& e = fg.extents();
    sx_ = e.nx + 1;
    sy_ = e.ny + 1;
    table_.assign(sx_ * sy_ * (e.nz + 1), 0);
    for (std::size_t k = 0; k < e.nz; ++k)
      for (std::size_t j = 0; j < e.ny; ++j)
        for (std::size_t i = 0; i < e.nx; ++i)
          at(i + 1, j + 1, k + 1) = (fg(i, j, k) ? 1U : 0U) + at(i, j + 1, k + 1) + at(i + 1, j, k + 1) +
                                    at(i + 1, j + 1, k) - at(i, j, k + 1) - at(i, j + 1, k) - at(i + 1, j, k) +
                                    at(i, j, k);
  }

  std::uint64_t count(const Index3& origin, const PatchSize& size) const {
    const auto& e = fg_.extents();
    std::array<std::size_t, 3> lo{};
    std::array<std::size_t, 3> hi{};
    for (std::size_t a = 0; a < 3; ++a) {
      const std::int64_t l = std::max<std::int64_t>(origin[a], 0);
      const std::int64_t h = std::min<std::int64_t>(origin[a] + static_cast<std::int64_t>(size[a]),
                                                    static_cast<std::int64_t>(e[a]));
      if (h <= l) return 0;
      lo[a] = static_cast<std::size_t>(l);
      hi[a] = static_cast<std::size_t>(h);
    }
    if (table_.empty()) {
      std::uint64_t n = 0;
      for (std::size_t k = lo[2]; k < hi[2]; ++k)
        for (std::size_t j = lo[1]; j < hi[1]; ++j)
          for (std::size_t i = lo[0]; i < hi[0]; ++i) n += fg_(i, j, k) != 0;
      return n;
    }
    const auto v = [&](std::size_t i, std::size_t j, std::size_t k) {
      return static_cast<std::int64_t>(table_[i + sx_ * (j + sy_ * k)]);
    };
    const std::int64_t s = v(hi[0], hi[1], hi[2]) - v(lo[0], hi[1], hi[2]) - v(hi[0], lo[1], hi[2]) -
                           v(hi[0], hi[1], lo[2]) + v(lo[0], lo[1], hi[2]) + v(lo[0], hi[1], lo[2]) +
                           v(hi[0], lo[1], lo[2]) - v(lo[0], lo[1], lo[2]);
    return static_cast<std::uint64_t>(s);
  }

 private:
  std::uint32_t& at(std::size_t i, std::size_t j, std::size_t k) { return table_[i + sx_ * (j + sy_ * k)]; }

  const Mask3D& fg_;
  std::size_t sx_ = 0;
  std::size_t sy_ = 0;
  std::vector<std::uint32_t> table_;
};

// Runs body(i) for i in [0, n) over `threads` workers and rethrows the
// failure with the lowest index, so errors are as deterministic as results.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::optional<std::size_t> failed_at;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(guard);
        if (!failed_at || i < *failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n));
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void PatchSpec::validate() const {
  for (auto s : size)
    if (s < 1) throw Error(ErrorCode::InvalidArgument, "patch size components must be >= 1");
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "patch count must be >= 1");
  if (!(min_fg_fraction >= 0.0 && min_fg_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "min_fg_fraction must lie in [0, 1]");
  if (max_attempts_per_patch < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts_per_patch must be >= 1");
}

std::vector<PatchPlan> plan_patches(const Mask3D& fg, const PatchSpec& spec, unsigned threads) {
  spec.validate();
  std::vector<std::size_t> candidates;
  for (std::size_t n = 0; n < fg.size(); ++n)
    if (fg[n]) candidates.push_back(n);
  if (candidates.empty()) throw Error(ErrorCode::EmptyForeground, "foreground mask is empty");

  const ForegroundCounter counter(fg, spec.min_fg_fraction > 0.0);
  const double patch_voxels = static_cast<double>(spec.size[0] * spec.size[1] * spec.size[2]);

  std::vector<PatchPlan> plans(spec.count);
  parallel_for(spec.count, threads, [&](std::size_t index) {
    for (std::size_t attempt = 0; attempt < spec.max_attempts_per_patch; ++attempt) {
      const std::uint64_t bits = philox_u64(spec.seed, index, static_cast<std::uint32_t>(attempt));
      const std::size_t pick = candidates[bounded(bits, candidates.size())];
      PatchPlan plan;
      plan.index = index;
      plan.center = fg.coords(pick);
      for (std::size_t a = 0; a < 3; ++a)
        plan.origin[a] = plan.center[a] - static_cast<std::int64_t>(spec.size[a] / 2);
      plan.fg_fraction = static_cast<double>(counter.count(plan.origin, spec.size)) / patch_voxels;
      plan.attempts = attempt + 1;
      if (plan.fg_fraction >= spec.min_fg_fraction) {
        plans[index] = plan;
        return;
      }
    }
    throw Error(ErrorCode::SamplingExhausted, "patch " + std::to_string(index) + ": no draw reached min_fg_fraction in " +
                                                  std::to_string(spec.max_attempts_per_patch) + " attempts");
  });
  return plans;
}

std::vector<std::uint8_t> make_loss_mask(const Index3& origin, const PatchSize& size, const Mask3D* anon,
                                         const Extents& volume_extents) {
  if (anon && anon->extents() != volume_extents)
    throw Error(ErrorCode::GridMismatch, "anonymization mask on a different grid");
  std::vector<std::uint8_t> loss(size[0] * size[1] * size[2], 0);
  std::size_t n = 0;
  for (std::size_t k = 0; k < size[2]; ++k) {
    const std::int64_t z = origin[2] + static_cast<std::int64_t>(k);
    for (std::size_t j = 0; j < size[1]; ++j) {
      const std::int64_t y = origin[1] + static_cast<std::int64_t>(j);
      for (std::size_t i = 0; i < size[0]; ++i, ++n) {
        const std::int64_t x = origin[0] + static_cast<std::int64_t>(i);
        const bool inside = x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < volume_extents.nx &&
                            static_cast<std::size_t>(y) < volume_extents.ny &&
                            static_cast<std::size_t>(z) < volume_extents.nz;
        if (!inside) continue;
        const bool masked =
            anon && (*anon)(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
        loss[n] = masked ? 0 : 1;
      }
    }
  }
  return loss;
}

std::vector<double> crop_patch(const Grid3<double>& vol, const Index3& origin, const PatchSize& size) {
  std::vector<double> out(size[0] * size[1] * size[2], 0.0);
  std::size_t n = 0;
  for (std::size_t k = 0; k < size[2]; ++k) {
    const std::int64_t z = origin[2] + static_cast<std::int64_t>(k);
    for (std::size_t j = 0; j < size[1]; ++j) {
      const std::int64_t y = origin[1] + static_cast<std::int64_t>(j);
      for (std::size_t i = 0; i < size[0]; ++i, ++n) {
        const std::int64_t x = origin[0] + static_cast<std::int64_t>(i);
        if (vol.contains(x, y, z))
          out[n] = vol(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
      }
    }
  }
  return out;
}

Grid3<double> patch_grid(const Geometry& source, const Index3& origin, const PatchSize& size,
                         std::vector<double> values) {
  Affine a = source.affine;
  for (std::size_t r = 0; r < 3; ++r)
    a[r][3] = source.affine[r][0] * static_cast<double>(origin[0]) +
              source.affine[r][1] * static_cast<double>(origin[1]) +
              source.affine[r][2] * static_cast<double>(origin[2]) + source.affine[r][3];
  return Grid3<double>(Geometry(Extents{size[0], size[1], size[2]}, source.spacing, a), std::move(values));
}

std::vector<SampledPatch> sample_patches(const Volume3D& vol, const Mask3D& fg, const Mask3D* anon,
                                         const PatchSpec& spec, unsigned threads) {
  if (fg.extents() != vol.extents()) throw Error(ErrorCode::GridMismatch, "foreground mask on a different grid");
  if (anon && anon->extents() != vol.extents())
    throw Error(ErrorCode::GridMismatch, "anonymization mask on a different grid");
  const auto plans = plan_patches(fg, spec, threads);
  std::vector<SampledPatch> patches(plans.size());
  parallel_for(plans.size(), threads, [&](std::size_t i) {
    const auto& plan = plans[i];
    SampledPatch& p = patches[i];
    p.index = plan.index;
    p.origin = plan.origin;
    p.center = plan.center;
    p.size = spec.size;
    p.fg_fraction = plan.fg_fraction;
    p.data = crop_patch(vol, plan.origin, spec.size);
    p.loss_mask = make_loss_mask(plan.origin, spec.size, anon, vol.extents());
  });
  return patches;
}

}  // namespace volprep
