#pragma once

// Planar projective geometry used throughout the library.
//
// Pixel convention: continuous coordinates with pixel centers at integer
// positions, origin at the center of the top-left pixel, x = column,
// y = row. Grid cells follow the same rule (x = col, y = row).
//
// World convention: right-handed frame in meters, ground plane z = 0.

#include <array>
#include <cstddef>

#include <Eigen/Dense>

#include "mvaug/error.hpp"

namespace mvaug {

constexpr double kSingularTolerance = 1e-12;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(Point2 a, Point2 b) noexcept;

// Invertible 3x3 matrix acting on homogeneous 2-D points. Stored
// un-normalized; H and s*H describe the same mapping.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}

  // Throws SingularMatrix when |det| <= 1e-12.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  static Homography from_row_major(const std::array<double, 9>& v);
  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  const Eigen::Matrix3d& matrix() const noexcept { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  double determinant() const { return m_.determinant(); }
  std::array<double, 9> row_major() const;

  // Scaled so that m[2][2] = 1, or the largest-magnitude entry is 1 when
  // m[2][2] is (near) zero.
  Homography normalized() const;

  // Homogeneous product m * (x, y, 1).
  Eigen::Vector3d apply_raw(Point2 p) const noexcept;

  // Maps p and divides by w. Throws PointAtInfinity when |w| < 1e-12.
  Point2 apply(Point2 p) const;

 private:
  struct Unchecked {};
  Homography(const Eigen::Matrix3d& m, Unchecked) : m_(m) {}

  friend Homography compose(const Homography& a, const Homography& b);

  Eigen::Matrix3d m_;
};

// Matrix product a * b: maps through b first, then a.
Homography compose(const Homography& a, const Homography& b);

// Adjugate inverse. Throws SingularMatrix when |det| <= 1e-12.
Homography invert(const Homography& h);

inline Point2 apply_point(const Homography& h, Point2 p) { return h.apply(p); }

// Elementwise comparison after normalizing both sides.
bool approx_equal(const Homography& a, const Homography& b, double tol);

struct CameraCalibration {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  // Throws InvalidCalibration if R is not a rotation (1e-9) or K is not
  // upper-triangular with K[2][2] = 1 and positive focal lengths.
  void validate() const;

  // Full 3x4 pinhole projection K [R | t] of a world point. Returns the
  // homogeneous pixel vector.
  Eigen::Vector3d project_homogeneous(const Eigen::Vector3d& world) const;
};

// K [r1 r2 t]: world ground coordinates (x, y, 1) in meters to homogeneous
// pixels. Throws DegenerateProjection when the result is singular.
Homography ground_projection_matrix(const CameraCalibration& c);

// Axis-angle (radians) to rotation matrix.
Eigen::Matrix3d rodrigues_to_rotation(const Eigen::Vector3d& r);

struct GroundGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;
  double cell_size = 1.0;
  double origin_x = 0.0;  // world x of the center of cell (0, 0)
  double origin_y = 0.0;

  // Throws InvalidArgument unless rows, cols >= 1 and cell_size > 0.
  void validate() const;

  std::size_t cell_count() const noexcept { return rows * cols; }
  // True when the point falls in the footprint of some cell, i.e.
  // [-0.5, cols - 0.5) x [-0.5, rows - 0.5) in cell coordinates.
  bool contains(Point2 cell) const noexcept;

  Point2 grid_to_ground(Point2 cell) const noexcept;
  Point2 ground_to_grid(Point2 world) const noexcept;

  friend bool operator==(const GroundGrid&, const GroundGrid&) = default;
};

// Grid-cell coordinates (col, row, 1) to world ground meters.
Homography grid_homography(const GroundGrid& g);

// ground_projection_matrix(c) * grid_homography(g): grid cells to pixels.
Homography grid_projection(const CameraCalibration& c, const GroundGrid& g);

}  // namespace mvaug
