#include "mvaug/geometry.hpp"

#include <cmath>
#include <sstream>

namespace mvaug {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::DegenerateLookAt: return "DegenerateLookAt";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidCalibration: return "InvalidCalibration";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

double distance(Point2 a, Point2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Homography::Homography(const Eigen::Matrix3d& m) : m_(m) {
  const double det = m_.determinant();
  if (!(std::abs(det) > kSingularTolerance)) {
    std::ostringstream os;
    os << "homography determinant " << det;
    throw Error(ErrorCode::SingularMatrix, os.str());
  }
}

Homography Homography::from_row_major(const std::array<double, 9>& v) {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return Homography(m);
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scaling(double sx, double sy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return Homography(m);
}

std::array<double, 9> Homography::row_major() const {
  std::array<double, 9> v{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[static_cast<std::size_t>(3 * r + c)] = m_(r, c);
  return v;
}

Homography Homography::normalized() const {
  double s = m_(2, 2);
  if (std::abs(s) < 1e-9) {
    Eigen::Index r = 0, c = 0;
    m_.cwiseAbs().maxCoeff(&r, &c);
    s = m_(r, c);
  }
  return Homography(m_ / s, Unchecked{});
}

Eigen::Vector3d Homography::apply_raw(Point2 p) const noexcept {
  return m_ * Eigen::Vector3d(p.x, p.y, 1.0);
}

Point2 Homography::apply(Point2 p) const {
  const Eigen::Vector3d q = apply_raw(p);
  if (!(std::abs(q.z()) >= kSingularTolerance)) {
    throw Error(ErrorCode::PointAtInfinity, "point maps to the line at infinity");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography compose(const Homography& a, const Homography& b) {
  return Homography(a.m_ * b.m_, Homography::Unchecked{});
}

Homography invert(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  Eigen::Matrix3d adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  if (!(std::abs(det) > kSingularTolerance)) {
    throw Error(ErrorCode::SingularMatrix, "cannot invert a singular homography");
  }
  return Homography(adj / det);
}

bool approx_equal(const Homography& a, const Homography& b, double tol) {
  const Eigen::Matrix3d d = a.normalized().matrix() - b.normalized().matrix();
  return d.cwiseAbs().maxCoeff() <= tol;
}

void CameraCalibration::validate() const {
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9) || !(std::abs(R.determinant() - 1.0) <= 1e-9)) {
    throw Error(ErrorCode::InvalidCalibration, "R is not a rotation matrix");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw Error(ErrorCode::InvalidCalibration, "K must be upper-triangular with K[2][2] = 1");
  }
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
    throw Error(ErrorCode::InvalidCalibration, "focal lengths must be positive");
  }
  if (!K.allFinite() || !t.allFinite()) {
    throw Error(ErrorCode::InvalidCalibration, "non-finite calibration entry");
  }
}

Eigen::Vector3d CameraCalibration::project_homogeneous(const Eigen::Vector3d& world) const {
  return K * (R * world + t);
}

Homography ground_projection_matrix(const CameraCalibration& c) {
  Eigen::Matrix3d rt;
  rt.col(0) = c.R.col(0);
  rt.col(1) = c.R.col(1);
  rt.col(2) = c.t;
  const Eigen::Matrix3d m = c.K * rt;
  if (!(std::abs(m.determinant()) > kSingularTolerance)) {
    throw Error(ErrorCode::DegenerateProjection,
                "ground plane projection is singular (camera center on the ground plane?)");
  }
  return Homography(m);
}

Eigen::Matrix3d rodrigues_to_rotation(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = r / theta;
  Eigen::Matrix3d kx;
  kx << 0.0, -k.z(), k.y(), k.z(), 0.0, -k.x(), -k.y(), k.x(), 0.0;
  return Eigen::Matrix3d::Identity() + std::sin(theta) * kx + (1.0 - std::cos(theta)) * kx * kx;
}

void GroundGrid::validate() const {
  if (rows < 1 || cols < 1 || !(cell_size > 0.0) || !std::isfinite(cell_size) ||
      !std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw Error(ErrorCode::InvalidArgument, "ground grid needs rows, cols >= 1 and cell_size > 0");
  }
}

bool GroundGrid::contains(Point2 cell) const noexcept {
  return cell.x >= -0.5 && cell.y >= -0.5 && cell.x < static_cast<double>(cols) - 0.5 &&
         cell.y < static_cast<double>(rows) - 0.5;
}

Point2 GroundGrid::grid_to_ground(Point2 cell) const noexcept {
  return {origin_x + cell.x * cell_size, origin_y + cell.y * cell_size};
}

namespace {
// Snaps values within 1e-9 of an integer onto it so cell centers survive a
// ground round trip exactly.
double snap_to_lattice(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}
}  // namespace

Point2 GroundGrid::ground_to_grid(Point2 world) const noexcept {
  return {snap_to_lattice((world.x - origin_x) / cell_size),
          snap_to_lattice((world.y - origin_y) / cell_size)};
}

Homography grid_homography(const GroundGrid& g) {
  g.validate();
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = g.cell_size;
  m(1, 1) = g.cell_size;
  m(0, 2) = g.origin_x;
  m(1, 2) = g.origin_y;
  return Homography(m);
}

Homography grid_projection(const CameraCalibration& c, const GroundGrid& g) {
  return compose(ground_projection_matrix(c), grid_homography(g));
}

}  // namespace mvaug
