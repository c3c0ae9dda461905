#pragma once

// Geometric reference detector: project view heatmaps to the ground,
// aggregate them, and extract point detections with NMS + top-k + 2-means.

#include <cstdint>
#include <span>
#include <vector>

#include "mvaug/geometry.hpp"
#include "mvaug/warp.hpp"

namespace mvaug {

enum class AggregationMode { Mean, Max };

struct Detection {
  Point2 cell;  // grid coordinates (x = col, y = row)
  double score = 0.0;
};

struct DetectionSet {
  std::int64_t frame = 0;
  std::vector<Detection> detections;
};

constexpr std::size_t kDefaultMaxPeaks = 200;

// ceil(0.5 m / cell_size): suppression radius matching the evaluation
// threshold.
double default_nms_radius(const GroundGrid& grid);

// Per-cell mean (or max) over the views whose mask is valid at that cell;
// cells valid in no view are 0. Throws GridMismatch on differing grids.
GroundMap aggregate_ground_maps(std::span<const GroundMap> maps, std::span<const ValidMask> masks,
                                AggregationMode mode);

namespace reference {
GroundMap aggregate_ground_maps(std::span<const GroundMap> maps, std::span<const ValidMask> masks,
                                AggregationMode mode);
}  // namespace reference

// Sub-cell peak location from a quadratic fit to the log of the neighborhood
// of (row, col): a 2-D fit over the 3x3 block for interior cells, 1-D fits
// per axis on the border. Offsets are confined to the cell footprint except
// outward from a border, where the one-sided fit may place the center off
// the grid. The integer cell is kept wherever the fit is not a maximum.
Point2 refine_peak(const GroundMap& map, std::size_t row, std::size_t col);

struct NmsOptions {
  std::size_t max_peaks = kDefaultMaxPeaks;
  bool refine = true;
};

// Greedy NMS: take the global maximum (lowest row-major index on ties), emit
// it, zero every cell within radius_cells, repeat until max_peaks or the
// maximum is <= 0. With refinement on, a maximum whose refined position
// falls outside the grid is suppressed without being emitted.
DetectionSet nms_heatmap(const GroundMap& map, double radius_cells, NmsOptions opts = {});

// 1-D 2-means on scores (centroids start at min and max, Lloyd iterations
// until assignments stop changing); keeps the high cluster in input order.
// Inputs with fewer than two detections or a single distinct score are
// returned unchanged.
DetectionSet kmeans2_score_filter(const DetectionSet& dets);

// mean((x - x_hat)^2) over cells.
double mse_ground_loss(const GroundMap& x, const GroundMap& x_hat);

// (1/V) * sum_v mean((r_v - r_hat_v)^2).
double mse_image_loss(std::span<const ImageBuffer> r, std::span<const ImageBuffer> r_hat);

struct DetectionOptions {
  double nms_radius = 0.0;  // <= 0 selects default_nms_radius(grid)
  AggregationMode mode = AggregationMode::Mean;
  NmsOptions nms;
};

struct DetectionOutput {
  DetectionSet detections;
  GroundMap aggregate;
};

// project_to_ground per view -> aggregate -> NMS (top max_peaks) -> 2-means.
DetectionOutput run_detection_full(std::span<const ImageBuffer> images,
                                   std::span<const Homography> t_grids, const GroundGrid& grid,
                                   const DetectionOptions& opts, std::int64_t frame = 0,
                                   std::span<const ValidMask> image_masks = {});

DetectionSet run_detection(std::span<const ImageBuffer> images,
                           std::span<const Homography> t_grids, const GroundGrid& grid,
                           double nms_radius, AggregationMode mode, std::int64_t frame = 0);

}  // namespace mvaug
