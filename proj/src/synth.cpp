#include "mvaug/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "mvaug/rng.hpp"

namespace mvaug {

void SceneConfig::validate() const {
  const bool ok = area_w > 0.0 && area_h > 0.0 && n_cameras >= 2 && camera_height > 0.0 &&
                  camera_ring_radius > 0.0 && n_frames > 0 && image_w > 0 &&
                  image_h > 0 && focal_px > 0.0 && heat_sigma_px > 0.0;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "scene config fields must be positive");
}

GroundGrid SceneConfig::default_grid() const {
  constexpr double cell = 0.4;
  GroundGrid g;
  g.cols = static_cast<std::size_t>(std::ceil(area_w / cell - 1e-9));
  g.rows = static_cast<std::size_t>(std::ceil(area_h / cell - 1e-9));
  g.cell_size = cell;
  g.origin_x = cell / 2.0;
  g.origin_y = cell / 2.0;
  return g;
}

Extrinsics look_at_extrinsics(const Eigen::Vector3d& cam_pos, const Eigen::Vector3d& target,
                              const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = target - cam_pos;
  if (forward.norm() < 1e-12) {
    throw Error(ErrorCode::DegenerateLookAt, "camera position equals target");
  }
  const Eigen::Vector3d z = forward.normalized();
  const Eigen::Vector3d side = z.cross(up);
  if (side.norm() < 1e-9 * std::max(1.0, up.norm())) {
    throw Error(ErrorCode::DegenerateLookAt, "up vector is parallel to the viewing direction");
  }
  const Eigen::Vector3d x = side.normalized();
  const Eigen::Vector3d y = z.cross(x);
  Extrinsics e;
  e.R.row(0) = x.transpose();
  e.R.row(1) = y.transpose();
  e.R.row(2) = z.transpose();
  e.t = -e.R * cam_pos;
  return e;
}

SyntheticScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  SyntheticScene scene;
  scene.config = cfg;

  const Eigen::Vector3d center(cfg.area_w / 2.0, cfg.area_h / 2.0, 0.0);
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = cfg.focal_px;
  K(1, 1) = cfg.focal_px;
  K(0, 2) = (static_cast<double>(cfg.image_w) - 1.0) / 2.0;
  K(1, 2) = (static_cast<double>(cfg.image_h) - 1.0) / 2.0;
  for (std::size_t k = 0; k < cfg.n_cameras; ++k) {
    const double phi =
        2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.n_cameras);
    const Eigen::Vector3d pos = center + Eigen::Vector3d(cfg.camera_ring_radius * std::cos(phi),
                                                         cfg.camera_ring_radius * std::sin(phi),
                                                         cfg.camera_height);
    const Extrinsics e = look_at_extrinsics(pos, center, Eigen::Vector3d::UnitZ());
    scene.cameras.push_back({K, e.R, e.t});
  }

  scene.frames.resize(cfg.n_frames);
  for (std::size_t f = 0; f < cfg.n_frames; ++f) {
    Rng rng = Rng::derive(cfg.seed, {0x5CE4E, f});
    auto& peds = scene.frames[f];
    peds.reserve(cfg.n_pedestrians);
    for (std::size_t i = 0; i < cfg.n_pedestrians; ++i) {
      const double x = rng.uniform(0.0, cfg.area_w);
      const double y = rng.uniform(0.0, cfg.area_h);
      peds.push_back({i, {x, y}});
    }
  }
  return scene;
}

std::optional<Point2> project_ground_point(const CameraCalibration& cam, Point2 world) {
  const Eigen::Vector3d q = cam.project_homogeneous({world.x, world.y, 0.0});
  if (!(q.z() > 1e-9)) return std::nullopt;
  return Point2{q.x() / q.z(), q.y() / q.z()};
}

void splat_gaussians(ImageBuffer& img, std::span<const Point2> centers, double sigma) {
  const double radius = 4.0 * sigma;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  for (const Point2& c : centers) {
    const auto x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(c.x - radius)));
    const auto x1 = std::min<std::ptrdiff_t>(w - 1, static_cast<std::ptrdiff_t>(std::ceil(c.x + radius)));
    const auto y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(c.y - radius)));
    const auto y1 = std::min<std::ptrdiff_t>(h - 1, static_cast<std::ptrdiff_t>(std::ceil(c.y + radius)));
    for (std::ptrdiff_t y = y0; y <= y1; ++y) {
      for (std::ptrdiff_t x = x0; x <= x1; ++x) {
        const double dx = static_cast<double>(x) - c.x;
        const double dy = static_cast<double>(y) - c.y;
        float& v = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        const double sum = v + std::exp(-(dx * dx + dy * dy) * inv_two_var);
        v = static_cast<float>(std::min(1.0, sum));
      }
    }
  }
}

ImageBuffer render_view_heatmap(const SyntheticScene& scene, std::size_t view, std::size_t frame,
                                double sigma_px) {
  if (view >= scene.cameras.size() || frame >= scene.frames.size()) {
    throw Error(ErrorCode::InvalidArgument, "view or frame index out of range");
  }
  const auto& cfg = scene.config;
  ImageBuffer img(cfg.image_h, cfg.image_w, 1);
  std::vector<Point2> feet;
  const double w = static_cast<double>(cfg.image_w), h = static_cast<double>(cfg.image_h);
  for (const Pedestrian& p : scene.frames[frame]) {
    const auto px = project_ground_point(scene.cameras[view], p.world);
    if (px && px->x >= 0.0 && px->y >= 0.0 && px->x <= w - 1.0 && px->y <= h - 1.0) {
      feet.push_back(*px);
    }
  }
  splat_gaussians(img, feet, sigma_px);
  return img;
}

GroundMap render_ground_truth(const SyntheticScene& scene, std::size_t frame,
                              const GroundGrid& grid, double sigma_cells) {
  if (frame >= scene.frames.size()) {
    throw Error(ErrorCode::InvalidArgument, "frame index out of range");
  }
  grid.validate();
  GroundMap map(grid);
  std::vector<Point2> cells;
  for (const Pedestrian& p : scene.frames[frame]) cells.push_back(grid.ground_to_grid(p.world));
  splat_gaussians(map.values, cells, sigma_cells);
  return map;
}

}  // namespace mvaug
