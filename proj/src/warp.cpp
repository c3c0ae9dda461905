#include "mvaug/warp.hpp"

#include <algorithm>
#include <cmath>

namespace mvaug {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw Error(ErrorCode::ShapeMismatch, "image data length does not match its dimensions");
  }
}

std::size_t ValidMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

GroundMap::GroundMap(const GroundGrid& g, ImageBuffer v) : grid(g), values(std::move(v)) {
  if (values.height() != g.rows || values.width() != g.cols) {
    throw Error(ErrorCode::GridMismatch, "raster dimensions differ from its grid");
  }
}

namespace {

constexpr double kBehindCamera = 1e-9;

// Shared sampling core. Weights are combined in a fixed order so the serial
// and parallel kernels agree bit for bit.
inline bool sample_into(const float* data, std::size_t w, std::size_t h, std::size_t ch,
                        double x, double y, double* out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(w) - 1.0 &&
        y <= static_cast<double>(h) - 1.0)) {
    for (std::size_t c = 0; c < ch; ++c) out[c] = 0.0;
    return false;
  }
  const auto x0 = static_cast<std::size_t>(x);
  const auto y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const float* p00 = data + (y0 * w + x0) * ch;
  const float* p10 = data + (y0 * w + x1) * ch;
  const float* p01 = data + (y1 * w + x0) * ch;
  const float* p11 = data + (y1 * w + x1) * ch;
  for (std::size_t c = 0; c < ch; ++c) {
    const double top = (1.0 - fx) * p00[c] + fx * p10[c];
    const double bottom = (1.0 - fx) * p01[c] + fx * p11[c];
    out[c] = (1.0 - fy) * top + fy * bottom;
  }
  return true;
}

struct RowKernel {
  const ImageBuffer& img;
  const Eigen::Matrix3d& m;
  double min_w;        // homogeneous w must exceed this (signed test)
  bool two_sided;      // when true, |w| is tested instead of w

  void operator()(std::size_t row, std::size_t out_w, float* out, std::uint8_t* valid,
                  double* scratch) const {
    const std::size_t ch = img.channels();
    const double y = static_cast<double>(row);
    for (std::size_t col = 0; col < out_w; ++col) {
      const double x = static_cast<double>(col);
      const double hx = m(0, 0) * x + m(0, 1) * y + m(0, 2);
      const double hy = m(1, 0) * x + m(1, 1) * y + m(1, 2);
      const double hw = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      const bool in_front = two_sided ? std::abs(hw) >= min_w : hw > min_w;
      bool ok = false;
      if (in_front) {
        ok = sample_into(img.data().data(), img.width(), img.height(), ch, hx / hw, hy / hw,
                         scratch);
      }
      float* dst = out + col * ch;
      for (std::size_t c = 0; c < ch; ++c) dst[c] = ok ? static_cast<float>(scratch[c]) : 0.0f;
      valid[col] = ok ? 1 : 0;
    }
  }
};

void check_source(const ImageBuffer& img) {
  if (img.empty() || img.channels() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "cannot warp an empty image");
  }
}

WarpResult run_parallel(const RowKernel& kernel, std::size_t out_w, std::size_t out_h) {
  WarpResult r{ImageBuffer(out_h, out_w, kernel.img.channels()), ValidMask(out_h, out_w)};
  const std::size_t ch = kernel.img.channels();
  float* out = r.image.data().data();
  std::uint8_t* valid = r.mask.data().data();
  const auto rows = static_cast<std::ptrdiff_t>(out_h);
#pragma omp parallel
  {
    std::vector<double> scratch(ch);
#pragma omp for schedule(static)
    for (std::ptrdiff_t row = 0; row < rows; ++row) {
      const auto ur = static_cast<std::size_t>(row);
      kernel(ur, out_w, out + ur * out_w * ch, valid + ur * out_w, scratch.data());
    }
  }
  return r;
}

}  // namespace

bool bilinear_sample(const ImageBuffer& img, double x, double y, std::span<double> out) {
  if (out.size() < img.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "sample buffer smaller than channel count");
  }
  if (img.empty()) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  return sample_into(img.data().data(), img.width(), img.height(), img.channels(), x, y,
                     out.data());
}

WarpResult warp_image(const ImageBuffer& img, const Homography& h, std::size_t out_w,
                      std::size_t out_h) {
  check_source(img);
  return run_parallel(RowKernel{img, h.matrix(), kSingularTolerance, true}, out_w, out_h);
}

GroundProjection project_to_ground(const ImageBuffer& img, const Homography& t_grid,
                                   const GroundGrid& grid) {
  check_source(img);
  grid.validate();
  WarpResult r =
      run_parallel(RowKernel{img, t_grid.matrix(), kBehindCamera, false}, grid.cols, grid.rows);
  return {GroundMap(grid, std::move(r.image)), std::move(r.mask)};
}

namespace {

ValidMask carry_mask(const ValidMask& mask, const Homography& h, std::size_t out_w,
                     std::size_t out_h, bool behind_test) {
  ValidMask out(out_h, out_w);
  const std::size_t w = mask.width(), hgt = mask.height();
  if (w == 0 || hgt == 0) return out;
  const Eigen::Matrix3d& m = h.matrix();
  for (std::size_t row = 0; row < out_h; ++row) {
    const double y = static_cast<double>(row);
    for (std::size_t col = 0; col < out_w; ++col) {
      const double x = static_cast<double>(col);
      const double hw = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (behind_test ? !(hw > kBehindCamera) : !(std::abs(hw) >= kSingularTolerance)) continue;
      const double sx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / hw;
      const double sy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / hw;
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= static_cast<double>(w) - 1.0 &&
            sy <= static_cast<double>(hgt) - 1.0)) {
        continue;
      }
      const auto x0 = static_cast<std::size_t>(sx);
      const auto y0 = static_cast<std::size_t>(sy);
      // Neighbors with zero bilinear weight do not contribute.
      const std::size_t x1 = sx > static_cast<double>(x0) ? std::min(x0 + 1, w - 1) : x0;
      const std::size_t y1 = sy > static_cast<double>(y0) ? std::min(y0 + 1, hgt - 1) : y0;
      out.set(row, col, mask.at(y0, x0) && mask.at(y0, x1) && mask.at(y1, x0) && mask.at(y1, x1));
    }
  }
  return out;
}

}  // namespace

ValidMask warp_mask(const ValidMask& mask, const Homography& h, std::size_t out_w,
                    std::size_t out_h) {
  return carry_mask(mask, h, out_w, out_h, false);
}

ValidMask project_mask_to_ground(const ValidMask& mask, const Homography& t_grid,
                                 const GroundGrid& grid) {
  grid.validate();
  return carry_mask(mask, t_grid, grid.cols, grid.rows, true);
}

namespace reference {

namespace {

WarpResult serial_warp(const ImageBuffer& img, const Homography& h, std::size_t out_w,
                       std::size_t out_h, bool behind_test) {
  check_source(img);
  WarpResult r{ImageBuffer(out_h, out_w, img.channels()), ValidMask(out_h, out_w)};
  std::vector<double> v(img.channels());
  for (std::size_t row = 0; row < out_h; ++row) {
    for (std::size_t col = 0; col < out_w; ++col) {
      const Eigen::Vector3d q =
          h.apply_raw({static_cast<double>(col), static_cast<double>(row)});
      const bool usable = behind_test ? q.z() > kBehindCamera : std::abs(q.z()) >= kSingularTolerance;
      const bool ok = usable && bilinear_sample(img, q.x() / q.z(), q.y() / q.z(), v);
      for (std::size_t c = 0; c < img.channels(); ++c) {
        r.image.at(row, col, c) = ok ? static_cast<float>(v[c]) : 0.0f;
      }
      r.mask.set(row, col, ok);
    }
  }
  return r;
}

}  // namespace

WarpResult warp_image(const ImageBuffer& img, const Homography& h, std::size_t out_w,
                      std::size_t out_h) {
  return serial_warp(img, h, out_w, out_h, false);
}

GroundProjection project_to_ground(const ImageBuffer& img, const Homography& t_grid,
                                   const GroundGrid& grid) {
  grid.validate();
  WarpResult r = serial_warp(img, t_grid, grid.cols, grid.rows, true);
  return {GroundMap(grid, std::move(r.image)), std::move(r.mask)};
}

}  // namespace reference

}  // namespace mvaug
