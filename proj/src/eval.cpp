#include "mvaug/eval.hpp"

#include <algorithm>
#include <limits>

namespace mvaug {

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost.front().size();
  if (m < n) throw Error(ErrorCode::ShapeMismatch, "assignment needs rows <= cols");
  for (const auto& row : cost) {
    if (row.size() != m) throw Error(ErrorCode::ShapeMismatch, "ragged cost matrix");
  }

  // Shortest augmenting path formulation, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) assignment[owner[j] - 1] = j - 1;
  }
  return assignment;
}

FrameMatch match_detections(std::span<const Point2> dets, std::span<const Point2> gts,
                            double threshold_m) {
  if (!(threshold_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
  FrameMatch out;
  const std::size_t nd = dets.size(), ng = gts.size();
  if (nd == 0 || ng == 0) {
    out.false_positives = nd;
    out.false_negatives = ng;
    return out;
  }

  // Square problem; inadmissible pairs and padding cost more than any set of
  // admissible distances, so the optimum maximizes the number of admissible
  // matches first and their total distance second.
  const std::size_t n = std::max(nd, ng);
  const double blocked = threshold_m * static_cast<double>(std::min(nd, ng)) + 1.0;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, blocked));
  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      const double d = distance(dets[i], gts[j]);
      if (d <= threshold_m) cost[i][j] = d;
    }
  }
  const std::vector<std::size_t> assignment = solve_assignment(cost);
  for (std::size_t i = 0; i < nd; ++i) {
    const std::size_t j = assignment[i];
    if (j < ng) {
      const double d = distance(dets[i], gts[j]);
      if (d <= threshold_m) out.pairs.push_back({i, j, d});
    }
  }
  out.false_positives = nd - out.pairs.size();
  out.false_negatives = ng - out.pairs.size();
  return out;
}

MetricsReport compute_metrics(std::span<const FrameMatch> frames, double threshold_m) {
  if (!(threshold_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
  MetricsReport r;
  double quality = 0.0;
  for (const FrameMatch& f : frames) {
    r.tp += f.pairs.size();
    r.fp += f.false_positives;
    r.fn += f.false_negatives;
    for (const MatchedPair& p : f.pairs) quality += 1.0 - p.distance / threshold_m;
  }
  r.gt = r.tp + r.fn;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  r.precision = (r.tp + r.fp == 0) ? 1.0 : d(r.tp) / d(r.tp + r.fp);
  r.recall = (r.gt == 0) ? 1.0 : d(r.tp) / d(r.gt);
  r.modp = (r.tp == 0) ? 0.0 : quality / d(r.tp);
  r.moda = (r.gt == 0) ? 1.0 - d(r.fp) : 1.0 - (d(r.fn) + d(r.fp)) / d(r.gt);
  return r;
}

}  // namespace mvaug
