// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "nerfsr/data.hpp"
#include "nerfsr/image.hpp"
#include "nerfsr/renderer.hpp"
#include "nerfsr/sampling.hpp"
#include "nerfsr/sr.hpp"
#include "nerfsr/training.hpp"

namespace nerfsr {
namespace {

FieldConfig bench_field(int resolution) {
  FieldConfig fc;
  fc.resolution = {resolution, resolution, resolution};
  fc.density_shift = -2.0;
  return fc;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = Vec3(3.0 * uniform01(rng) - 1.5, 3.0 * uniform01(rng) - 1.5, 3.0 * uniform01(rng) - 1.5);
  return out;
}

void BM_Composite(benchmark::State& state) {
  const int rays = 1024, n = static_cast<int>(state.range(0));
  Rng rng(1);
  std::vector<double> sigmas(static_cast<std::size_t>(rays) * n), deltas(sigmas.size());
  std::vector<Vec3> colors(sigmas.size());
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    sigmas[i] = 2.0 * uniform01(rng);
    deltas[i] = 0.02;
    colors[i] = Vec3(uniform01(rng), uniform01(rng), uniform01(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(composite(sigmas, colors, deltas, n, Vec3::Ones()));
  state.SetItemsProcessed(state.iterations() * rays);
}
BENCHMARK(BM_Composite)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_QueryDensity(benchmark::State& state) {
  const RadianceField field(bench_field(static_cast<int>(state.range(0))), 2);
  const std::vector<Vec3> points = random_points(1 << 14, 3);
  for (auto _ : state) benchmark::DoNotOptimize(field.query_density(points));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.size()));
}
BENCHMARK(BM_QueryDensity)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_QueryColor(benchmark::State& state) {
  const RadianceField field(bench_field(static_cast<int>(state.range(0))), 2);
  const std::vector<Vec3> points = random_points(1 << 14, 4);
  const std::vector<Vec3> dirs(points.size(), Vec3(0.0, 0.0, -1.0));
  for (auto _ : state) benchmark::DoNotOptimize(field.query_color(points, dirs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.size()));
}
BENCHMARK(BM_QueryColor)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_RenderImage(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const RadianceField field(bench_field(64), 5);
  ToySceneSpec spec = ToySceneSpec::standard(0);
  spec.width = spec.height = side;
  const ToyOracle oracle(spec);
  const CameraModel camera = oracle.ring_camera(30.0, 30.0);
  RenderConfig rc;
  rc.n_samples = 96;
  for (auto _ : state) benchmark::DoNotOptimize(render_image(field, camera, rc));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_RenderImage)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SRUpscale(benchmark::State& state) {
  const int ratio = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  SRConfig sc;
  sc.ratio = ratio;
  const SRNetwork net(sc, 6);
  Rng rng(7);
  Image lr(side, side, 3);
  for (double& v : lr.data) v = uniform01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.upscale(lr));
  state.SetItemsProcessed(state.iterations() * side * side * ratio * ratio);
}
BENCHMARK(BM_SRUpscale)->Args({2, 100})->Args({4, 50})->Unit(benchmark::kMillisecond);

void BM_BilinearUpscale(benchmark::State& state) {
  Rng rng(8);
  Image lr(100, 100, 3);
  for (double& v : lr.data) v = uniform01(rng);
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_upscale(lr, 2));
}
BENCHMARK(BM_BilinearUpscale)->Unit(benchmark::kMicrosecond);

void BM_PatchLossBackward(benchmark::State& state) {
  const bool with_sr = state.range(0) != 0;
  ToySceneSpec spec = ToySceneSpec::standard(0);
  spec.width = spec.height = 128;
  spec.n_train = 1;
  spec.n_test = 1;
  spec.n_val = 0;
  const ToyScene scene = generate_toy_scene(spec);
  FieldConfig fc = bench_field(64);
  fc.box = scene.dataset.box;
  RadianceField field(fc, 9);
  SRConfig sc;
  SRNetwork sr(sc, 10);
  RenderConfig rc;
  rc.n_samples = 96;
  rc.stratified = true;
  const View& view = scene.dataset.train[0];
  const PatchPair pair = make_patch_pair(view.image, view.camera, PatchSpec{16, 16, 64, 2, std::nullopt});
  for (auto _ : state) {
    field.zero_grad();
    sr.zero_grad();
    benchmark::DoNotOptimize(compute_patch_loss(field, with_sr ? &sr : nullptr, rc, pair, true));
  }
}
BENCHMARK(BM_PatchLossBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace nerfsr

BENCHMARK_MAIN();
