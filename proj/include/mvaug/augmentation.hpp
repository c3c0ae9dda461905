#pragma once

// Geometric augmentations expressed as homographies.
//
// Every homography built here maps OUTPUT coordinates to SOURCE coordinates
// (inverse-warp direction): the augmented raster at q samples the source at
// h * q. Under this convention the compensated grid projection is
// T' = hv^-1 * T * hs.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mvaug/geometry.hpp"
#include "mvaug/rng.hpp"

namespace mvaug {

enum class AugmentationKind { None, HFlip, VFlip, Affine, Perspective, Crop };

std::string_view to_string(AugmentationKind kind) noexcept;
std::optional<AugmentationKind> parse_augmentation_kind(std::string_view name) noexcept;

struct AugmentationRanges {
  double max_rotation_deg = 45.0;
  double max_translate_frac = 0.2;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double max_shear_deg = 10.0;
  double crop_area_min = 0.8;
  double crop_area_max = 1.0;
  double crop_aspect_min = 0.75;
  double crop_aspect_max = 4.0 / 3.0;
  double perspective_distortion = 0.5;
  double view_proportion = 0.5;
  double scene_proportion = 0.5;

  // Throws InvalidArgument on inverted ranges or proportions outside [0, 1].
  void validate() const;
};

// Scalars drawn for one augmentation. Only the fields of the sampled kind are
// meaningful; the rest keep their neutral defaults.
struct AugmentationParams {
  double rotation_deg = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  double scale = 1.0;
  double shear_deg = 0.0;
  double crop_x = 0.0;
  double crop_y = 0.0;
  double crop_w = 0.0;
  double crop_h = 0.0;
  // Inward displacement magnitudes of the TL, TR, BR, BL corners.
  std::array<Point2, 4> corner_offsets{};
};

struct ViewAugmentation {
  AugmentationKind kind = AugmentationKind::None;
  Homography h;
  AugmentationParams params;
};

// Same content as a view augmentation, but the homography acts on grid-cell
// coordinates and is shared by every view of a sample.
struct SceneAugmentation {
  AugmentationKind kind = AugmentationKind::None;
  Homography h;
  AugmentationParams params;
};

Homography hflip_homography(double width_px);
Homography vflip_homography(double height_px);

// Sampling homography of the affine transform
//   F = translate(center + (tx, ty)) * rotate * scale * shear_x * translate(-center)
// i.e. h = F^-1. The last row is exactly (0, 0, 1).
Homography affine_homography(double rotation_deg, double tx_px, double ty_px, double scale,
                             double shear_deg, Point2 center);

// Solves the 8x8 system (h22 = 1) so that h * src[i] = dst[i].
// Throws DegenerateQuad when three points of either quad are collinear.
Homography homography_from_4pt(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst);

// Corners TL, TR, BR, BL of a width x height raster displaced inward by the
// given non-negative offsets; returns the map from displaced corners to the
// original ones.
Homography perspective_from_offsets(double width, double height,
                                    const std::array<Point2, 4>& offsets);

// Random inward corner displacement up to distortion * (width/2, height/2)
// per axis. Resamples degenerate quads up to 8 times.
Homography perspective_homography(double distortion_scale, double width, double height, Rng& rng);

// Resized-crop: output (x, y) samples the source at
// (crop_x + x * crop_w / out_w, crop_y + y * crop_h / out_h).
Homography crop_homography(double crop_x, double crop_y, double crop_w, double crop_h,
                           double out_w, double out_h);

// Draws one augmentation of `kind` for a width x height raster. With
// probability 1 - proportion the draw is the identity (kind None).
ViewAugmentation sample_view_augmentation(AugmentationKind kind, const AugmentationRanges& ranges,
                                          double image_w, double image_h, Rng& rng);

// Scene-level draw in grid-cell coordinates, gated by scene_proportion.
SceneAugmentation sample_scene_augmentation(AugmentationKind kind,
                                            const AugmentationRanges& ranges,
                                            const GroundGrid& grid, Rng& rng);

// hv^-1 * t_grid * hs.
Homography augment_projection(const Homography& t_grid, const Homography& hv,
                              const Homography& hs);

struct TransformedPoint {
  Point2 p;
  bool visible = false;
};

// Source pixel u moves to hv^-1 * u. Points leaving [0, w-1] x [0, h-1], or
// mapped to infinity, are kept with visible = false.
std::vector<TransformedPoint> transform_view_annotations(std::span<const Point2> points_px,
                                                         const Homography& hv, double width,
                                                         double height);

// Ground-truth cell g moves to hs^-1 * g; visibility means inside the grid.
std::vector<TransformedPoint> transform_scene_annotations(std::span<const Point2> cells,
                                                          const Homography& hs,
                                                          const GroundGrid& grid);

}  // namespace mvaug
