#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "closed_loop.hpp"
#include "mvaug/pipeline.hpp"
#include "oracles.hpp"
#include "random.hpp"

using namespace mvaug;
using testsupport::uniform;

namespace {

GroundGrid small_grid(std::size_t rows = 30, std::size_t cols = 40) {
  GroundGrid g;
  g.rows = rows;
  g.cols = cols;
  g.cell_size = 0.4;
  return g;
}

GroundMap random_map(std::mt19937_64& g, const GroundGrid& grid) {
  GroundMap m(grid);
  for (float& v : m.values.data()) v = static_cast<float>(uniform(g, 0, 1));
  return m;
}

ValidMask random_mask(std::mt19937_64& g, const GroundGrid& grid) {
  ValidMask m(grid.rows, grid.cols);
  for (auto& v : m.data()) v = uniform(g, 0, 1) < 0.7 ? 1 : 0;
  return m;
}

DetectionSet with_scores(std::initializer_list<double> scores) {
  DetectionSet d;
  double x = 0;
  for (double s : scores) d.detections.push_back({{x++, 0}, s});
  return d;
}

std::vector<double> scores_of(const DetectionSet& d) {
  std::vector<double> s;
  for (const auto& x : d.detections) s.push_back(x.score);
  return s;
}

}  // namespace

TEST_CASE("default_nms_radius") {
  CHECK(default_nms_radius(small_grid()) == 2.0);
  GroundGrid g = small_grid();
  g.cell_size = 0.1;
  CHECK(default_nms_radius(g) == 5.0);
  g.cell_size = 0.025;
  CHECK(default_nms_radius(g) == 20.0);
}

TEST_CASE("aggregate_ground_maps: worked examples") {
  const GroundGrid grid = small_grid(2, 2);
  GroundMap a(grid), b(grid);
  std::fill(a.values.data().begin(), a.values.data().end(), 0.2f);
  std::fill(b.values.data().begin(), b.values.data().end(), 0.6f);
  ValidMask all(2, 2, true), part(2, 2, true), none(2, 2, false);
  part.set(0, 0, false);
  const std::vector<GroundMap> maps{a, b};

  const std::vector<ValidMask> masks{all, part};
  const GroundMap mean = aggregate_ground_maps(maps, masks, AggregationMode::Mean);
  CHECK(mean.at(1, 1) == doctest::Approx(0.4));
  CHECK(mean.at(0, 0) == doctest::Approx(0.2));
  const GroundMap mx = aggregate_ground_maps(maps, masks, AggregationMode::Max);
  CHECK(mx.at(1, 1) == doctest::Approx(0.6));

  const std::vector<ValidMask> empty{none, none};
  CHECK(aggregate_ground_maps(maps, empty, AggregationMode::Mean).at(0, 1) == 0.0f);

  const GroundMap single = aggregate_ground_maps(std::span(&b, 1), std::span(&part, 1), AggregationMode::Mean);
  CHECK(single.at(0, 0) == 0.0f);
  CHECK(single.at(0, 1) == 0.6f);

  const std::vector<GroundMap> mixed{a, GroundMap(small_grid(2, 3))};
  const std::vector<ValidMask> mixed_masks{all, ValidMask(2, 3, true)};
  try {
    aggregate_ground_maps(mixed, mixed_masks, AggregationMode::Mean);
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
}

TEST_CASE("aggregate_ground_maps: naive oracle and serial reference") {
  std::mt19937_64 g(11);
  const GroundGrid grid = small_grid();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<GroundMap> maps;
    std::vector<ValidMask> masks;
    for (int v = 0; v < 5; ++v) {
      maps.push_back(random_map(g, grid));
      masks.push_back(random_mask(g, grid));
    }
    for (const AggregationMode mode : {AggregationMode::Mean, AggregationMode::Max}) {
      const GroundMap got = aggregate_ground_maps(maps, masks, mode);
      CHECK(got.values == reference::aggregate_ground_maps(maps, masks, mode).values);
      for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
          double sum = 0, best = 0;
          int n = 0;
          for (std::size_t v = 0; v < maps.size(); ++v) {
            if (!masks[v].at(r, c)) continue;
            sum += maps[v].at(r, c);
            best = n == 0 ? maps[v].at(r, c) : std::max<double>(best, maps[v].at(r, c));
            ++n;
          }
          const double expect = n == 0 ? 0.0 : (mode == AggregationMode::Mean ? sum / n : best);
          CHECK(got.at(r, c) == doctest::Approx(expect).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("nms_heatmap: worked examples") {
  const GroundGrid grid = small_grid();
  GroundMap zero(grid);
  CHECK(nms_heatmap(zero, 2.0).detections.empty());

  GroundMap two(grid);
  two.at(10, 10) = 1.0f;
  two.at(10, 20) = 1.0f;
  const DetectionSet d = nms_heatmap(two, 3.0, {kDefaultMaxPeaks, false});
  REQUIRE(d.detections.size() == 2);
  // Equal scores: the lower row-major index comes first.
  CHECK(d.detections[0].cell == Point2{10, 10});
  CHECK(d.detections[1].cell == Point2{20, 10});
  CHECK(distance(d.detections[0].cell, d.detections[1].cell) == 10.0);

  GroundMap gauss(grid);
  const std::vector<Point2> c{{17.3, 12.6}};
  splat_gaussians(gauss.values, c, 1.5);
  // Radius past the splat support (the 4-sigma square), so the tails go too.
  const DetectionSet one = nms_heatmap(gauss, 10.0);
  REQUIRE(one.detections.size() == 1);
  // Log-quadratic refinement is exact for a sampled Gaussian.
  CHECK(one.detections[0].cell.x == doctest::Approx(17.3).epsilon(1e-3));
  CHECK(one.detections[0].cell.y == doctest::Approx(12.6).epsilon(1e-3));
  const DetectionSet raw = nms_heatmap(gauss, 10.0, {kDefaultMaxPeaks, false});
  CHECK(raw.detections[0].cell == Point2{17, 13});

  CHECK_THROWS_AS(nms_heatmap(gauss, 0.0), Error);
  GroundMap rgb(grid, 3);
  CHECK_THROWS_AS(nms_heatmap(rgb, 2.0), Error);
}

TEST_CASE("nms_heatmap: top-k cap and off-grid border peaks") {
  const GroundGrid grid = small_grid();
  GroundMap many(grid);
  for (std::size_t r = 0; r < grid.rows; r += 3)
    for (std::size_t c = 0; c < grid.cols; c += 3) many.at(r, c) = 0.5f;
  CHECK(nms_heatmap(many, 1.0, {5, false}).detections.size() == 5);
  CHECK(nms_heatmap(many, 1.0, {kDefaultMaxPeaks, false}).detections.size() == 140);

  // A Gaussian centered off the grid still rises toward the edge; its
  // refined center is outside, so it is dropped and suppresses its region.
  GroundMap edge(grid);
  const std::vector<Point2> c{{-1.5, 15.0}};
  splat_gaussians(edge.values, c, 1.5);
  CHECK(nms_heatmap(edge, 10.0).detections.empty());
  const DetectionSet unrefined = nms_heatmap(edge, 10.0, {kDefaultMaxPeaks, false});
  REQUIRE_FALSE(unrefined.detections.empty());
  CHECK(unrefined.detections[0].cell == Point2{0, 15});

  // On-grid border peaks survive with a sub-cell position.
  GroundMap inside(grid);
  const std::vector<Point2> c2{{0.3, 15.0}};
  splat_gaussians(inside.values, c2, 1.5);
  const DetectionSet d = nms_heatmap(inside, 10.0);
  REQUIRE(d.detections.size() == 1);
  CHECK(d.detections[0].cell.x == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("refine_peak keeps the cell on flat or non-positive neighborhoods") {
  const GroundGrid grid = small_grid();
  GroundMap flat(grid);
  std::fill(flat.values.data().begin(), flat.values.data().end(), 0.5f);
  CHECK(refine_peak(flat, 5, 5) == Point2{5, 5});
  GroundMap spike(grid);
  spike.at(5, 5) = 1.0f;
  CHECK(refine_peak(spike, 5, 5) == Point2{5, 5});
}

TEST_CASE("property: NMS separation, ordering and cardinality") {
  std::mt19937_64 g(12);
  const GroundGrid grid = small_grid();
  for (int trial = 0; trial < 20; ++trial) {
    const GroundMap m = random_map(g, grid);
    const double radius = uniform(g, 1.0, 4.0);
    const DetectionSet d = nms_heatmap(m, radius, {kDefaultMaxPeaks, false});
    CHECK(d.detections.size() <= kDefaultMaxPeaks);
    for (std::size_t i = 0; i < d.detections.size(); ++i) {
      if (i > 0) CHECK(d.detections[i].score <= d.detections[i - 1].score);
      for (std::size_t j = i + 1; j < d.detections.size(); ++j)
        CHECK(distance(d.detections[i].cell, d.detections[j].cell) > radius);
    }
  }
}

TEST_CASE("kmeans2_score_filter: worked examples") {
  CHECK(scores_of(kmeans2_score_filter(with_scores({0.9, 0.8, 0.1, 0.05}))) == std::vector<double>{0.9, 0.8});
  CHECK(kmeans2_score_filter(DetectionSet{}).detections.empty());
  CHECK(scores_of(kmeans2_score_filter(with_scores({0.3, 0.3, 0.3}))) == std::vector<double>{0.3, 0.3, 0.3});
  CHECK(scores_of(kmeans2_score_filter(with_scores({0.7}))) == std::vector<double>{0.7});
  // Input order is preserved among survivors.
  CHECK(scores_of(kmeans2_score_filter(with_scores({0.1, 0.8, 0.05, 0.9}))) == std::vector<double>{0.8, 0.9});
}

TEST_CASE("kmeans2_score_filter: exhaustive two-partition oracle") {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 200; ++trial) {
    DetectionSet d;
    const int n = 2 + static_cast<int>(g() % 12);
    // Two well separated groups: the Lloyd fixed point is the global optimum.
    for (int i = 0; i < n; ++i) {
      const double s = (i % 2 == 0) ? uniform(g, 0.0, 0.2) : uniform(g, 0.7, 1.0);
      d.detections.push_back({{static_cast<double>(i), 0}, s});
    }
    std::vector<double> got = scores_of(kmeans2_score_filter(d));
    std::sort(got.begin(), got.end());
    CHECK(got == oracle::best_two_partition_high(scores_of(d)));
  }
}

TEST_CASE("property: kmeans2 is permutation invariant") {
  std::mt19937_64 g(14);
  for (int trial = 0; trial < 100; ++trial) {
    DetectionSet d;
    const int n = 1 + static_cast<int>(g() % 20);
    for (int i = 0; i < n; ++i) d.detections.push_back({{static_cast<double>(i), 0}, uniform(g, 0, 1)});
    DetectionSet shuffled = d;
    std::shuffle(shuffled.detections.begin(), shuffled.detections.end(), g);
    std::vector<double> a = scores_of(kmeans2_score_filter(d)), b = scores_of(kmeans2_score_filter(shuffled));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("losses: worked examples and naive oracle") {
  const GroundGrid grid = small_grid(4, 5);
  GroundMap ones(grid), zeros(grid);
  std::fill(ones.values.data().begin(), ones.values.data().end(), 1.0f);
  CHECK(mse_ground_loss(ones, ones) == 0.0);
  CHECK(mse_ground_loss(ones, zeros) == 1.0);
  CHECK_THROWS_AS(mse_ground_loss(ones, GroundMap(small_grid(4, 6))), Error);

  const std::vector<ImageBuffer> r{ImageBuffer(2, 2, 1, 0.0f), ImageBuffer(3, 1, 1, 0.0f)};
  std::vector<ImageBuffer> rh = r;
  CHECK(mse_image_loss(r, rh) == 0.0);
  std::fill(rh[0].data().begin(), rh[0].data().end(), static_cast<float>(std::sqrt(0.2)));
  std::fill(rh[1].data().begin(), rh[1].data().end(), static_cast<float>(std::sqrt(0.4)));
  CHECK(mse_image_loss(r, rh) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK_THROWS_AS(mse_image_loss(r, std::span(rh).first(1)), Error);
  const std::vector<ImageBuffer> wrong{ImageBuffer(2, 2), ImageBuffer(1, 3)};
  CHECK_THROWS_AS(mse_image_loss(r, wrong), Error);

  std::mt19937_64 g(15);
  for (int trial = 0; trial < 10; ++trial) {
    const GroundMap a = random_map(g, grid), b = random_map(g, grid);
    double s = 0;
    for (std::size_t i = 0; i < grid.rows; ++i)
      for (std::size_t j = 0; j < grid.cols; ++j) s += std::pow(static_cast<double>(a.at(i, j)) - b.at(i, j), 2);
    const double l = mse_ground_loss(a, b);
    CHECK(l == doctest::Approx(s / grid.cell_count()).epsilon(1e-9));
    CHECK(l == mse_ground_loss(b, a));
    CHECK(l > 0.0);
  }
}

TEST_CASE("run_detection: empty input and shape errors") {
  const SyntheticScene s = generate_scene(SceneConfig{});
  const GroundGrid grid = s.config.default_grid();
  const std::vector<ImageBuffer> img{ImageBuffer(68, 120)};
  const std::vector<Homography> t{grid_projection(s.cameras[0], grid)};
  CHECK(run_detection(img, t, grid, 0.0, AggregationMode::Mean).detections.empty());
  const std::vector<Homography> two{t[0], t[0]};
  CHECK_THROWS_AS(run_detection(img, two, grid, 0.0, AggregationMode::Mean), Error);
}

TEST_CASE("run_detection: synthetic scene without augmentation") {
  const SyntheticScene s = generate_scene(SceneConfig{});
  const GroundGrid grid = s.config.default_grid();
  const testsupport::ClosedLoopResult r = testsupport::run_closed_loop(s, grid, {});
  std::size_t gt = 0, close = 0;
  for (std::size_t f = 0; f < r.frames.size(); ++f) {
    for (const Point2& c : r.gt_cells[f]) {
      ++gt;
      bool found = false;
      for (const Detection& d : r.detections[f].detections) found = found || distance(d.cell, c) <= 1.5;
      close += found ? 1 : 0;
    }
  }
  // Pedestrians standing within one cell of each other merge into one peak.
  CHECK(static_cast<double>(close) >= 0.97 * static_cast<double>(gt));
  CHECK(r.metrics.precision >= 0.98);
}

TEST_CASE("run_detection: matched augmentation keeps MODA") {
  const SyntheticScene s = generate_scene(SceneConfig{});
  const GroundGrid grid = s.config.default_grid();
  const double base = testsupport::run_closed_loop(s, grid, {}).metrics.moda;
  for (std::uint64_t seed : {1u, 2u}) {
    testsupport::ClosedLoopOptions o;
    o.view_kind = AugmentationKind::Affine;
    o.scene_kind = AugmentationKind::Affine;
    o.proportion = 0.5;
    o.seed = seed;
    CHECK(std::abs(testsupport::run_closed_loop(s, grid, o).metrics.moda - base) <= 0.02);
  }
}

TEST_CASE("property: scene augmentation equivariance") {
  const SyntheticScene s = generate_scene(SceneConfig{});
  const GroundGrid grid = s.config.default_grid();
  std::mt19937_64 g(16);
  for (int trial = 0; trial < 4; ++trial) {
    const Homography hs = testsupport::random_affine(g, static_cast<double>(grid.cols), static_cast<double>(grid.rows));
    const testsupport::EquivarianceResult r =
        testsupport::scene_equivariance(s, grid, static_cast<std::size_t>(trial), hs);
    CHECK(r.unexplained == 0);
    CHECK(r.max_error <= 1.5);
    CHECK(r.matched > 0);
  }
}
