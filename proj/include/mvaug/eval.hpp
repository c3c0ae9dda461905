#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvaug/geometry.hpp"

namespace mvaug {

constexpr double kDefaultMatchThreshold = 0.5;  // meters

struct MatchedPair {
  std::size_t det = 0;
  std::size_t gt = 0;
  double distance = 0.0;  // meters
};

struct FrameMatch {
  std::vector<MatchedPair> pairs;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

struct MetricsReport {
  double moda = 1.0;
  double modp = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t gt = 0;
};

// Minimum-cost assignment on a rectangular cost matrix (rows <= cols) via
// the Hungarian method with potentials. Returns the column assigned to
// each row.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost);

// Among the matchings that use only pairs within threshold_m, picks one of
// maximum cardinality and, among those, minimum total distance.
FrameMatch match_detections(std::span<const Point2> dets, std::span<const Point2> gts,
                            double threshold_m = kDefaultMatchThreshold);

// MODA = 1 - (FN + FP) / GT, MODP = mean over matches of (1 - d / threshold).
// Empty denominators: precision = 1 if TP + FP = 0, recall = 1 if GT = 0,
// MODP = 0 if TP = 0, MODA = 1 if GT = 0 and FP = 0 (1 - FP otherwise).
MetricsReport compute_metrics(std::span<const FrameMatch> frames,
                              double threshold_m = kDefaultMatchThreshold);

}  // namespace mvaug
