#pragma once

// Deterministic multi-camera scene generator. Pedestrians are ground points
// (feet only) observed by pinhole cameras on a ring around the area.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mvaug/geometry.hpp"
#include "mvaug/warp.hpp"

namespace mvaug {

struct SceneConfig {
  double area_w = 36.0;  // meters along world x
  double area_h = 16.0;  // meters along world y
  std::size_t n_cameras = 4;
  double camera_height = 15.0;
  double camera_ring_radius = 5.0;
  std::size_t n_pedestrians = 20;
  std::size_t n_frames = 10;
  std::size_t image_w = 120;
  std::size_t image_h = 68;
  double focal_px = 50.0;
  double heat_sigma_px = 1.0;
  std::uint64_t seed = 7;

  // Throws InvalidArgument unless every field is positive and n_cameras >= 2.
  // n_pedestrians may be 0 (empty scenes).
  void validate() const;

  // Grid used with the default scene: 90 x 40 cells of 0.4 m covering the area.
  GroundGrid default_grid() const;
};

struct Pedestrian {
  std::uint64_t id = 0;
  Point2 world;  // meters
};

struct SyntheticScene {
  SceneConfig config;
  std::vector<CameraCalibration> cameras;
  std::vector<std::vector<Pedestrian>> frames;
};

struct Extrinsics {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
};

// Camera z axis points from cam_pos to target, x axis to the right, y axis
// down the image. Throws DegenerateLookAt when up is parallel to the view
// direction or cam_pos == target.
Extrinsics look_at_extrinsics(const Eigen::Vector3d& cam_pos, const Eigen::Vector3d& target,
                              const Eigen::Vector3d& up);

SyntheticScene generate_scene(const SceneConfig& cfg);

// Feet pixel of a ground point, or nothing when it is behind the camera.
std::optional<Point2> project_ground_point(const CameraCalibration& cam, Point2 world);

// Peak-1 Gaussians at every visible pedestrian's feet pixel, clamped to 1.
ImageBuffer render_view_heatmap(const SyntheticScene& scene, std::size_t view, std::size_t frame,
                                double sigma_px);

// Peak-1 Gaussians at each pedestrian's grid position, clamped to 1.
GroundMap render_ground_truth(const SyntheticScene& scene, std::size_t frame,
                              const GroundGrid& grid, double sigma_cells);

// Splats peak-1 Gaussians at arbitrary raster positions (x = col, y = row).
void splat_gaussians(ImageBuffer& img, std::span<const Point2> centers, double sigma);

}  // namespace mvaug
