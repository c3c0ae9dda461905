// Serial reference kernels against the OpenMP ones on a 960x536 view and a 180x80 grid.

#include <benchmark/benchmark.h>

#include <random>

#include "mvaug/augmentation.hpp"
#include "mvaug/synth.hpp"
#include "mvaug/warp.hpp"

using namespace mvaug;

namespace {

struct Fixture {
  GroundGrid grid;
  Homography t_grid;
  Homography hv;
  ImageBuffer image{536, 960};

  Fixture() {
    grid.cols = 180;
    grid.rows = 80;
    grid.cell_size = 0.1;
    CameraCalibration cam;
    cam.K << 1000, 0, 479.5, 0, 1000, 267.5, 0, 0, 1;
    const auto ext = look_at_extrinsics({-3, -2, 6}, {9, 4, 0}, Eigen::Vector3d::UnitZ());
    cam.R = ext.R;
    cam.t = ext.t;
    t_grid = grid_projection(cam, grid);
    std::mt19937_64 g(7);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : image.data()) v = u(g);
    AugmentationRanges ranges;
    ranges.view_proportion = 1.0;
    Rng rng(3);
    hv = sample_view_augmentation(AugmentationKind::Affine, ranges, 960, 536, rng).h;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_WarpParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(warp_image(f.image, f.hv, 960, 536));
}

void BM_WarpReference(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::warp_image(f.image, f.hv, 960, 536));
}

void BM_ProjectParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(project_to_ground(f.image, f.t_grid, f.grid));
}

void BM_ProjectReference(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::project_to_ground(f.image, f.t_grid, f.grid));
}

}  // namespace

BENCHMARK(BM_WarpParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WarpReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProjectParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ProjectReference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
