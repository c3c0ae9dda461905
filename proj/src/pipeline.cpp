#include "mvaug/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

namespace mvaug {

double default_nms_radius(const GroundGrid& grid) {
  grid.validate();
  return std::ceil(0.5 / grid.cell_size - 1e-9);
}

namespace {

void check_aggregate_inputs(std::span<const GroundMap> maps, std::span<const ValidMask> masks) {
  if (maps.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one ground map");
  if (maps.size() != masks.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one valid mask per ground map required");
  }
  const GroundMap& first = maps.front();
  for (std::size_t v = 0; v < maps.size(); ++v) {
    if (!(maps[v].grid == first.grid) || maps[v].values.channels() != first.values.channels()) {
      throw Error(ErrorCode::GridMismatch, "ground maps do not share one grid");
    }
    if (masks[v].height() != first.grid.rows || masks[v].width() != first.grid.cols) {
      throw Error(ErrorCode::GridMismatch, "valid mask does not match the grid");
    }
  }
}

}  // namespace

GroundMap aggregate_ground_maps(std::span<const GroundMap> maps, std::span<const ValidMask> masks,
                                AggregationMode mode) {
  check_aggregate_inputs(maps, masks);
  const GroundGrid& grid = maps.front().grid;
  const std::size_t ch = maps.front().values.channels();
  GroundMap out(grid, ch);
  const auto cells = static_cast<std::ptrdiff_t>(grid.cell_count());
  float* dst = out.values.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < cells; ++i) {
    const auto cell = static_cast<std::size_t>(i);
    for (std::size_t c = 0; c < ch; ++c) {
      double acc = 0.0;
      std::size_t n = 0;
      for (std::size_t v = 0; v < maps.size(); ++v) {
        if (masks[v].data()[cell] == 0) continue;
        const double x = maps[v].values.data()[cell * ch + c];
        if (mode == AggregationMode::Max) {
          acc = n == 0 ? x : std::max(acc, x);
        } else {
          acc += x;
        }
        ++n;
      }
      if (n > 0 && mode == AggregationMode::Mean) acc /= static_cast<double>(n);
      dst[cell * ch + c] = static_cast<float>(acc);
    }
  }
  return out;
}

namespace reference {

GroundMap aggregate_ground_maps(std::span<const GroundMap> maps, std::span<const ValidMask> masks,
                                AggregationMode mode) {
  check_aggregate_inputs(maps, masks);
  const GroundGrid& grid = maps.front().grid;
  const std::size_t ch = maps.front().values.channels();
  GroundMap out(grid, ch);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t col = 0; col < grid.cols; ++col) {
      for (std::size_t c = 0; c < ch; ++c) {
        std::vector<double> contributors;
        for (std::size_t v = 0; v < maps.size(); ++v) {
          if (masks[v].at(r, col)) contributors.push_back(maps[v].at(r, col, c));
        }
        double value = 0.0;
        if (!contributors.empty()) {
          if (mode == AggregationMode::Max) {
            value = *std::max_element(contributors.begin(), contributors.end());
          } else {
            for (double x : contributors) value += x;
            value /= static_cast<double>(contributors.size());
          }
        }
        out.at(r, col, c) = static_cast<float>(value);
      }
    }
  }
  return out;
}

}  // namespace reference

namespace {

// Vertex offset of the parabola through log samples at -1, 0, +1.
std::optional<double> centered_vertex(double lm, double l0, double lp) {
  const double curv = lm - 2.0 * l0 + lp;
  if (!(curv < 0.0)) return std::nullopt;
  return std::clamp(0.5 * (lm - lp) / curv, -0.5, 0.5);
}

// Vertex offset, measured outward, of the parabola through log samples at
// 0, -1, -2 (border cell first). Not clamped outward: a vertex beyond +0.5
// marks an object centered off the grid.
double border_vertex(double l0, double l1, double l2) {
  const double slope = 0.5 * (3.0 * l0 - 4.0 * l1 + l2);
  const double curv = 0.5 * (l0 - 2.0 * l1 + l2);
  if (curv < 0.0) return std::max(-slope / (2.0 * curv), -0.5);
  return slope > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

// Sub-cell coordinate along one axis. `at(k)` reads the log value k cells
// away from the peak along that axis; NaN when not positive or off-grid.
template <class At>
double axis_refine(double base, std::size_t idx, std::size_t n, At at) {
  const auto ok = [](double v) { return std::isfinite(v); };
  if (n >= 3 && idx > 0 && idx + 1 < n) {
    const double lm = at(-1), l0 = at(0), lp = at(1);
    if (ok(lm) && ok(l0) && ok(lp)) {
      if (const auto off = centered_vertex(lm, l0, lp)) return base + *off;
    }
    return base;
  }
  if (n < 3) return base;
  const int dir = idx == 0 ? -1 : 1;  // outward direction in index space
  const double l0 = at(0), l1 = at(-dir), l2 = at(-2 * dir);
  if (!ok(l0) || !ok(l1) || !ok(l2)) return base;
  return base + dir * border_vertex(l0, l1, l2);
}

}  // namespace

Point2 refine_peak(const GroundMap& map, std::size_t row, std::size_t col) {
  const Point2 integer{static_cast<double>(col), static_cast<double>(row)};
  const GroundGrid& g = map.grid;
  const auto log_at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(g.rows) ||
        c >= static_cast<std::ptrdiff_t>(g.cols)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    const double v = map.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN();
  };
  const auto r0 = static_cast<std::ptrdiff_t>(row), c0 = static_cast<std::ptrdiff_t>(col);

  if (row == 0 || col == 0 || row + 1 >= g.rows || col + 1 >= g.cols) {
    return {axis_refine(integer.x, col, g.cols, [&](int k) { return log_at(r0, c0 + k); }),
            axis_refine(integer.y, row, g.rows, [&](int k) { return log_at(r0 + k, c0); })};
  }

  // Least squares fit of log v = a + b x + c y + d x^2 + e x y + f y^2.
  Eigen::Matrix<double, 9, 6> A;
  Eigen::Matrix<double, 9, 1> b;
  int k = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx, ++k) {
      const double l = log_at(r0 + dy, c0 + dx);
      if (!std::isfinite(l)) return integer;
      A.row(k) << 1.0, dx, dy, dx * dx, dx * dy, dy * dy;
      b(k) = l;
    }
  }
  const Eigen::Matrix<double, 6, 1> q = A.colPivHouseholderQr().solve(b);
  Eigen::Matrix2d hessian;
  hessian << 2.0 * q(3), q(4), q(4), 2.0 * q(5);
  // A proper maximum needs a negative-definite Hessian.
  if (!(hessian(0, 0) < 0.0) || !(hessian.determinant() > 0.0)) return integer;
  const Eigen::Vector2d offset = -hessian.inverse() * Eigen::Vector2d(q(1), q(2));
  return {integer.x + std::clamp(offset.x(), -0.5, 0.5),
          integer.y + std::clamp(offset.y(), -0.5, 0.5)};
}

DetectionSet nms_heatmap(const GroundMap& map, double radius_cells, NmsOptions opts) {
  if (map.values.channels() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "NMS needs a single-channel map");
  }
  if (!(radius_cells > 0.0)) throw Error(ErrorCode::InvalidArgument, "NMS radius must be positive");
  const GroundGrid& g = map.grid;
  std::vector<double> work(map.values.data().begin(), map.values.data().end());
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(radius_cells));
  const double r2 = radius_cells * radius_cells;

  DetectionSet out;
  while (out.detections.size() < opts.max_peaks) {
    // std::max_element returns the first maximum: lowest row-major index.
    const auto it = std::max_element(work.begin(), work.end());
    if (it == work.end() || !(*it > 0.0)) break;
    const auto idx = static_cast<std::size_t>(it - work.begin());
    const std::size_t row = idx / g.cols, col = idx % g.cols;
    const Point2 pos = opts.refine ? refine_peak(map, row, col)
                                   : Point2{static_cast<double>(col), static_cast<double>(row)};
    // Border maxima whose extrapolated center lies off the grid are the
    // tails of objects outside it; they still suppress their neighborhood.
    if (g.contains(pos)) out.detections.push_back({pos, *it});

    const auto r0 = static_cast<std::ptrdiff_t>(row), c0 = static_cast<std::ptrdiff_t>(col);
    for (std::ptrdiff_t dy = -reach; dy <= reach; ++dy) {
      const std::ptrdiff_t y = r0 + dy;
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.rows)) continue;
      for (std::ptrdiff_t dx = -reach; dx <= reach; ++dx) {
        const std::ptrdiff_t x = c0 + dx;
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.cols)) continue;
        if (static_cast<double>(dx * dx + dy * dy) <= r2) {
          work[static_cast<std::size_t>(y) * g.cols + static_cast<std::size_t>(x)] = 0.0;
        }
      }
    }
  }
  return out;
}

DetectionSet kmeans2_score_filter(const DetectionSet& dets) {
  const auto& d = dets.detections;
  if (d.size() < 2) return dets;
  // Work on sorted scores so centroid sums do not depend on input order.
  std::vector<double> scores;
  scores.reserve(d.size());
  for (const Detection& det : d) scores.push_back(det.score);
  std::sort(scores.begin(), scores.end());
  double lo = scores.front(), hi = scores.back();
  if (lo == hi) return dets;

  // Ties between the centroids go to the low cluster.
  const auto is_high = [&](double s) { return std::abs(s - hi) < std::abs(s - lo); };
  std::vector<bool> high(scores.size(), false);
  for (bool changed = true; changed;) {
    changed = false;
    double sum_lo = 0.0, sum_hi = 0.0;
    std::size_t n_lo = 0, n_hi = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool h = is_high(scores[i]);
      if (h != high[i]) changed = true;
      high[i] = h;
      (h ? sum_hi : sum_lo) += scores[i];
      ++(h ? n_hi : n_lo);
    }
    if (!changed) break;
    if (n_lo > 0) lo = sum_lo / static_cast<double>(n_lo);
    if (n_hi > 0) hi = sum_hi / static_cast<double>(n_hi);
  }

  DetectionSet out;
  out.frame = dets.frame;
  for (const Detection& det : d) {
    if (is_high(det.score)) out.detections.push_back(det);
  }
  return out;
}

namespace {

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  const auto x = a.data();
  const auto y = b.data();
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

}  // namespace

double mse_ground_loss(const GroundMap& x, const GroundMap& x_hat) {
  if (!(x.grid == x_hat.grid) || !x.values.same_shape(x_hat.values) || x.values.channels() != 1) {
    throw Error(ErrorCode::GridMismatch, "loss needs single-channel maps on one grid");
  }
  return mse(x.values, x_hat.values);
}

double mse_image_loss(std::span<const ImageBuffer> r, std::span<const ImageBuffer> r_hat) {
  if (r.size() != r_hat.size() || r.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "view lists must be non-empty and of equal length");
  }
  double acc = 0.0;
  for (std::size_t v = 0; v < r.size(); ++v) {
    if (!r[v].same_shape(r_hat[v])) {
      throw Error(ErrorCode::ShapeMismatch, "view heatmap shapes differ");
    }
    acc += mse(r[v], r_hat[v]);
  }
  return acc / static_cast<double>(r.size());
}

DetectionOutput run_detection_full(std::span<const ImageBuffer> images,
                                   std::span<const Homography> t_grids, const GroundGrid& grid,
                                   const DetectionOptions& opts, std::int64_t frame,
                                   std::span<const ValidMask> image_masks) {
  if (images.empty() || images.size() != t_grids.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one grid projection per view image");
  }
  if (!image_masks.empty() && image_masks.size() != images.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one validity mask per view image");
  }
  std::vector<GroundMap> maps;
  std::vector<ValidMask> masks;
  maps.reserve(images.size());
  masks.reserve(images.size());
  for (std::size_t v = 0; v < images.size(); ++v) {
    GroundProjection p = project_to_ground(images[v], t_grids[v], grid);
    if (!image_masks.empty()) {
      const ValidMask& im = image_masks[v];
      if (im.height() != images[v].height() || im.width() != images[v].width()) {
        throw Error(ErrorCode::ShapeMismatch, "validity mask does not match its image");
      }
      const ValidMask carried = project_mask_to_ground(im, t_grids[v], grid);
      for (std::size_t i = 0; i < p.mask.data().size(); ++i) p.mask.data()[i] &= carried.data()[i];
    }
    maps.push_back(std::move(p.map));
    masks.push_back(std::move(p.mask));
  }
  GroundMap agg = aggregate_ground_maps(maps, masks, opts.mode);
  const double radius = opts.nms_radius > 0.0 ? opts.nms_radius : default_nms_radius(grid);
  DetectionSet peaks = nms_heatmap(agg, radius, opts.nms);
  peaks.frame = frame;
  DetectionSet kept = kmeans2_score_filter(peaks);
  kept.frame = frame;
  return {std::move(kept), std::move(agg)};
}

DetectionSet run_detection(std::span<const ImageBuffer> images,
                           std::span<const Homography> t_grids, const GroundGrid& grid,
                           double nms_radius, AggregationMode mode, std::int64_t frame) {
  DetectionOptions opts;
  opts.nms_radius = nms_radius;
  opts.mode = mode;
  return run_detection_full(images, t_grids, grid, opts, frame).detections;
}

}  // namespace mvaug
