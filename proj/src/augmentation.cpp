#include "mvaug/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace mvaug {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool has_collinear_triple(const std::array<Point2, 4>& q) {
  double extent = 0.0;
  for (const Point2& p : q) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
  const double tol = 1e-10 * std::max(1.0, extent * extent);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (std::abs(cross(q[i], q[j], q[k])) <= tol) return true;
  return false;
}

AugmentationParams sample_crop(const AugmentationRanges& r, double w, double h, Rng& rng) {
  AugmentationParams p;
  const double log_lo = std::log(r.crop_aspect_min);
  const double log_hi = std::log(r.crop_aspect_max);
  double fw = 1.0, fh = 1.0;
  bool found = false;
  // Aspect is measured relative to the raster's own aspect so the area and
  // aspect ranges are jointly satisfiable for any raster shape.
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double area = rng.uniform(r.crop_area_min, r.crop_area_max);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    fw = std::sqrt(area * aspect);
    fh = std::sqrt(area / aspect);
    found = fw <= 1.0 && fh <= 1.0;
  }
  if (!found) {
    const double area = std::clamp(1.0, r.crop_area_min, r.crop_area_max);
    const double aspect = std::clamp(1.0, r.crop_aspect_min, r.crop_aspect_max);
    fw = std::min(1.0, std::sqrt(area * aspect));
    fh = std::min(1.0, std::sqrt(area / aspect));
  }
  p.crop_w = fw * w;
  p.crop_h = fh * h;
  // Keep the last output pixel center inside the source.
  p.crop_x = rng.uniform(0.0, (w - 1.0) * (1.0 - fw));
  p.crop_y = rng.uniform(0.0, (h - 1.0) * (1.0 - fh));
  return p;
}

struct Draw {
  AugmentationKind kind;
  Homography h;
  AugmentationParams params;
};

Draw draw(AugmentationKind kind, const AugmentationRanges& r, double w, double h,
          double proportion, Rng& rng) {
  r.validate();
  if (!(w > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "augmentation raster size must be positive");
  }
  if (kind == AugmentationKind::None || !rng.bernoulli(proportion)) {
    return {AugmentationKind::None, Homography::identity(), {}};
  }
  AugmentationParams p;
  const Point2 center{(w - 1.0) / 2.0, (h - 1.0) / 2.0};
  switch (kind) {
    case AugmentationKind::None:
      break;
    case AugmentationKind::HFlip:
      return {kind, hflip_homography(w), p};
    case AugmentationKind::VFlip:
      return {kind, vflip_homography(h), p};
    case AugmentationKind::Affine: {
      p.rotation_deg = rng.uniform(-r.max_rotation_deg, r.max_rotation_deg);
      p.translate_x = rng.uniform(-r.max_translate_frac, r.max_translate_frac) * w;
      p.translate_y = rng.uniform(-r.max_translate_frac, r.max_translate_frac) * h;
      p.scale = rng.uniform(r.scale_min, r.scale_max);
      p.shear_deg = rng.uniform(-r.max_shear_deg, r.max_shear_deg);
      return {kind,
              affine_homography(p.rotation_deg, p.translate_x, p.translate_y, p.scale,
                                p.shear_deg, center),
              p};
    }
    case AugmentationKind::Perspective: {
      for (int attempt = 0; attempt < 8; ++attempt) {
        for (Point2& o : p.corner_offsets) {
          o.x = rng.uniform(0.0, r.perspective_distortion * w / 2.0);
          o.y = rng.uniform(0.0, r.perspective_distortion * h / 2.0);
        }
        try {
          return {kind, perspective_from_offsets(w, h, p.corner_offsets), p};
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateQuad) throw;
        }
      }
      throw Error(ErrorCode::DegenerateQuad, "perspective sampling produced 8 degenerate quads");
    }
    case AugmentationKind::Crop: {
      p = sample_crop(r, w, h, rng);
      return {kind, crop_homography(p.crop_x, p.crop_y, p.crop_w, p.crop_h, w, h), p};
    }
  }
  return {AugmentationKind::None, Homography::identity(), {}};
}

}  // namespace

std::string_view to_string(AugmentationKind kind) noexcept {
  switch (kind) {
    case AugmentationKind::None: return "none";
    case AugmentationKind::HFlip: return "hflip";
    case AugmentationKind::VFlip: return "vflip";
    case AugmentationKind::Affine: return "affine";
    case AugmentationKind::Perspective: return "perspective";
    case AugmentationKind::Crop: return "crop";
  }
  return "none";
}

std::optional<AugmentationKind> parse_augmentation_kind(std::string_view name) noexcept {
  for (AugmentationKind k : {AugmentationKind::None, AugmentationKind::HFlip,
                             AugmentationKind::VFlip, AugmentationKind::Affine,
                             AugmentationKind::Perspective, AugmentationKind::Crop}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void AugmentationRanges::validate() const {
  const bool ok = max_rotation_deg >= 0.0 && max_translate_frac >= 0.0 && scale_min > 0.0 &&
                  scale_min <= scale_max && max_shear_deg >= 0.0 && max_shear_deg < 90.0 &&
                  crop_area_min > 0.0 && crop_area_min <= crop_area_max && crop_area_max <= 1.0 &&
                  crop_aspect_min > 0.0 && crop_aspect_min <= crop_aspect_max &&
                  perspective_distortion >= 0.0 && perspective_distortion <= 1.0 &&
                  view_proportion >= 0.0 && view_proportion <= 1.0 && scene_proportion >= 0.0 &&
                  scene_proportion <= 1.0;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid augmentation ranges");
}

Homography hflip_homography(double width_px) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = -1.0;
  m(0, 2) = width_px - 1.0;
  return Homography(m);
}

Homography vflip_homography(double height_px) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(1, 1) = -1.0;
  m(1, 2) = height_px - 1.0;
  return Homography(m);
}

Homography affine_homography(double rotation_deg, double tx_px, double ty_px, double scale,
                             double shear_deg, Point2 center) {
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "affine scale must be positive");
  const double a = rotation_deg * kDegToRad;
  Eigen::Matrix2d rotate;
  rotate << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  Eigen::Matrix2d shear;
  shear << 1.0, std::tan(shear_deg * kDegToRad), 0.0, 1.0;
  const Eigen::Matrix2d linear = rotate * (scale * shear);
  const Eigen::Vector2d c(center.x, center.y);
  const Eigen::Vector2d offset = c + Eigen::Vector2d(tx_px, ty_px) - linear * c;

  // Forward map is x -> linear * x + offset; store its inverse.
  const Eigen::Matrix2d inv = linear.inverse();
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.topLeftCorner<2, 2>() = inv;
  m.topRightCorner<2, 1>() = -inv * offset;
  return Homography(m);
}

Homography homography_from_4pt(const std::array<Point2, 4>& src,
                               const std::array<Point2, 4>& dst) {
  if (has_collinear_triple(src) || has_collinear_triple(dst)) {
    throw Error(ErrorCode::DegenerateQuad, "three of the four correspondences are collinear");
  }
  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    A.row(2 * i) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y;
    A.row(2 * i + 1) << 0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
  if (!lu.isInvertible()) throw Error(ErrorCode::DegenerateQuad, "singular 4-point system");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return Homography(m);
}

Homography perspective_from_offsets(double width, double height,
                                    const std::array<Point2, 4>& offsets) {
  const double r = width - 1.0, b = height - 1.0;
  const std::array<Point2, 4> corners{{{0.0, 0.0}, {r, 0.0}, {r, b}, {0.0, b}}};
  const std::array<Point2, 4> displaced{{
      {offsets[0].x, offsets[0].y},
      {r - offsets[1].x, offsets[1].y},
      {r - offsets[2].x, b - offsets[2].y},
      {offsets[3].x, b - offsets[3].y},
  }};
  if (displaced == corners) return Homography::identity();
  return homography_from_4pt(displaced, corners);
}

Homography perspective_homography(double distortion_scale, double width, double height, Rng& rng) {
  AugmentationRanges r;
  r.perspective_distortion = distortion_scale;
  r.view_proportion = 1.0;
  return draw(AugmentationKind::Perspective, r, width, height, 1.0, rng).h;
}

Homography crop_homography(double crop_x, double crop_y, double crop_w, double crop_h,
                           double out_w, double out_h) {
  if (!(crop_w > 0.0) || !(crop_h > 0.0) || !(out_w > 0.0) || !(out_h > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "crop and output sizes must be positive");
  }
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = crop_w / out_w;
  m(1, 1) = crop_h / out_h;
  m(0, 2) = crop_x;
  m(1, 2) = crop_y;
  return Homography(m);
}

ViewAugmentation sample_view_augmentation(AugmentationKind kind, const AugmentationRanges& ranges,
                                          double image_w, double image_h, Rng& rng) {
  Draw d = draw(kind, ranges, image_w, image_h, ranges.view_proportion, rng);
  return {d.kind, d.h, d.params};
}

SceneAugmentation sample_scene_augmentation(AugmentationKind kind,
                                            const AugmentationRanges& ranges,
                                            const GroundGrid& grid, Rng& rng) {
  grid.validate();
  Draw d = draw(kind, ranges, static_cast<double>(grid.cols), static_cast<double>(grid.rows),
                ranges.scene_proportion, rng);
  return {d.kind, d.h, d.params};
}

Homography augment_projection(const Homography& t_grid, const Homography& hv,
                              const Homography& hs) {
  return compose(invert(hv), compose(t_grid, hs));
}

std::vector<TransformedPoint> transform_view_annotations(std::span<const Point2> points_px,
                                                         const Homography& hv, double width,
                                                         double height) {
  const Homography inv = invert(hv);
  std::vector<TransformedPoint> out;
  out.reserve(points_px.size());
  for (const Point2& u : points_px) {
    try {
      const Point2 q = inv.apply(u);
      const bool inside = q.x >= 0.0 && q.y >= 0.0 && q.x <= width - 1.0 && q.y <= height - 1.0;
      out.push_back({q, inside});
    } catch (const Error&) {
      out.push_back({{std::nan(""), std::nan("")}, false});
    }
  }
  return out;
}

std::vector<TransformedPoint> transform_scene_annotations(std::span<const Point2> cells,
                                                          const Homography& hs,
                                                          const GroundGrid& grid) {
  const Homography inv = invert(hs);
  std::vector<TransformedPoint> out;
  out.reserve(cells.size());
  for (const Point2& g : cells) {
    try {
      const Point2 q = inv.apply(g);
      out.push_back({q, grid.contains(q)});
    } catch (const Error&) {
      out.push_back({{std::nan(""), std::nan("")}, false});
    }
  }
  return out;
}

}  // namespace mvaug
