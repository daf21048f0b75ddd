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

#include <benchmark/benchmark.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "volprep/anon_sim.hpp"
#include "volprep/metrics.hpp"
#include "volprep/morphology.hpp"
#include "volprep/nifti_io.hpp"
#include "volprep/sampler.hpp"

namespace {

using namespace volprep;

/// A few random balls on an n^3 lattice.
Mask3D blobs(std::size_t n, std::uint64_t seed, const Vec3& spacing = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  Mask3D m(Geometry({n, n, n}, spacing));
  std::uniform_real_distribution<double> pos(0.2 * n, 0.8 * n);
  std::uniform_real_distribution<double> rad(0.08 * n, 0.25 * n);
  for (int b = 0; b < 4; ++b) {
    const double cx = pos(rng), cy = pos(rng), cz = pos(rng), r = rad(rng);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
          const double dx = i - cx, dy = j - cy, dz = k - cz;
          if (dx * dx + dy * dy + dz * dz <= r * r) m(i, j, k) = 1;
        }
  }
  return m;
}

Volume3D noise_volume(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(100.0, 20.0);
  Volume3D v(Geometry({n, n, n}, {1, 1, 1}));
  for (auto& x : v.voxels()) x = d(rng);
  return v;
}

void BM_DistanceTransform(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = blobs(n, 1, {1.0, 1.0, 2.0});
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(m, m.spacing()));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m.size()));
}
BENCHMARK(BM_DistanceTransform)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DilateBall(benchmark::State& state) {
  const auto m = blobs(96, 2);
  const auto se = StructuringElement::ball(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dilate(m, se));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m.size()));
  state.counters["offsets"] = static_cast<double>(se.offsets().size());
}
// Radius 6 takes the distance-transform path.
BENCHMARK(BM_DilateBall)->Arg(1)->Arg(2)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_ConnectedComponents(benchmark::State& state) {
  const auto m = blobs(96, 3);
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(m, Connectivity::Full26));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m.size()));
}
BENCHMARK(BM_ConnectedComponents)->Unit(benchmark::kMillisecond);

void BM_FillHoles(benchmark::State& state) {
  const auto m = mask_not(blobs(96, 4));
  for (auto _ : state) benchmark::DoNotOptimize(fill_holes(m));
}
BENCHMARK(BM_FillHoles)->Unit(benchmark::kMillisecond);

void BM_GaussianBlur(benchmark::State& state) {
  const auto v = noise_volume(96, 5);
  const double sigma = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(v, sigma));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * v.size()));
}
BENCHMARK(BM_GaussianBlur)->Arg(1)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_HD95(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = blobs(n, 6);
  const auto b = blobs(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(hd95(a, b, a.spacing()));
}
BENCHMARK(BM_HD95)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Dice(benchmark::State& state) {
  const auto a = blobs(128, 8);
  const auto b = blobs(128, 9);
  for (auto _ : state) benchmark::DoNotOptimize(dice(a, b));
}
BENCHMARK(BM_Dice)->Unit(benchmark::kMicrosecond);

void BM_PlanPatches(benchmark::State& state) {
  const auto fg = blobs(128, 10);
  PatchSpec spec{.size = {32, 32, 32}, .count = 1000, .seed = 1, .min_fg_fraction = 0.2};
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(plan_patches(fg, spec, threads));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * spec.count));
}
BENCHMARK(BM_PlanPatches)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_SamplePatches(benchmark::State& state) {
  const auto vol = noise_volume(128, 11);
  const auto fg = blobs(128, 10);
  const auto anon = blobs(128, 12);
  PatchSpec spec{.size = {32, 32, 32}, .count = 64, .seed = 3};
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_patches(vol, fg, &anon, spec, threads));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * spec.count));
}
BENCHMARK(BM_SamplePatches)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_NiftiRoundTrip(benchmark::State& state) {
  const bool gz = state.range(0) != 0;
  const auto v = noise_volume(96, 13);
  const auto path = std::filesystem::temp_directory_path() / (gz ? "volprep_bench.nii.gz" : "volprep_bench.nii");
  const auto header = nifti::make_header(v.geometry(), nifti::Datatype::Int16);
  for (auto _ : state) {
    nifti::write_volume(v, header, path);
    benchmark::DoNotOptimize(nifti::read_volume(path));
  }
  std::filesystem::remove(path);
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * v.size() * 2));
}
BENCHMARK(BM_NiftiRoundTrip)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
