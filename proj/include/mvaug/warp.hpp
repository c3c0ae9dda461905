#pragma once

// Raster resampling by homography.
//
// Kernels in namespace mvaug are row-parallel (OpenMP). Namespace
// mvaug::reference holds plain serial versions of the same kernels; they are
// kept for testing and benchmarking and produce bit-identical output.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvaug/geometry.hpp"

namespace mvaug {

// Row-major, channel-interleaved float raster with samples in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels = 1, float fill = 0.0f);
  ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  float at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const ImageBuffer& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

// true where a sample came from in-bounds source pixels (and, for ground
// projection, from in front of the camera).
class ValidMask {
 public:
  ValidMask() = default;
  ValidMask(std::size_t height, std::size_t width, bool fill = false)
      : height_(height), width_(width), data_(height * width, fill ? 1 : 0) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool at(std::size_t row, std::size_t col) const { return data_[row * width_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v) { data_[row * width_ + col] = v ? 1 : 0; }
  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::size_t count() const noexcept;

  friend bool operator==(const ValidMask&, const ValidMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Raster living on a ground grid: values has grid.rows x grid.cols samples.
struct GroundMap {
  GroundGrid grid;
  ImageBuffer values;

  GroundMap() = default;
  explicit GroundMap(const GroundGrid& g, std::size_t channels = 1)
      : grid(g), values(g.rows, g.cols, channels) {}
  GroundMap(const GroundGrid& g, ImageBuffer v);

  float at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return values.at(row, col, ch);
  }
  float& at(std::size_t row, std::size_t col, std::size_t ch = 0) { return values.at(row, col, ch); }
};

struct WarpResult {
  ImageBuffer image;
  ValidMask mask;
};

struct GroundProjection {
  GroundMap map;
  ValidMask mask;
};

// 4-neighbor bilinear blend at continuous (x, y), written into out (one entry
// per channel, double precision). Returns false and zero-fills when the
// sample is not inside [0, w-1] x [0, h-1].
bool bilinear_sample(const ImageBuffer& img, double x, double y, std::span<double> out);

// out[q] = img(h * q); samples mapped to infinity (|w| < 1e-12) are invalid.
WarpResult warp_image(const ImageBuffer& img, const Homography& h, std::size_t out_w,
                      std::size_t out_h);

// Cell (col, row) samples img at t_grid * (col, row, 1). Cells whose
// homogeneous w <= 1e-9 are behind the camera and invalid.
GroundProjection project_to_ground(const ImageBuffer& img, const Homography& t_grid,
                                   const GroundGrid& grid);

// Output samples whose bilinear footprint (the neighbors with nonzero
// weight) lies entirely on pixels set in `mask`, under the sampling rules of warp_image and project_to_ground
// respectively. They carry the validity of an already-warped image forward.
ValidMask warp_mask(const ValidMask& mask, const Homography& h, std::size_t out_w,
                    std::size_t out_h);
ValidMask project_mask_to_ground(const ValidMask& mask, const Homography& t_grid,
                                 const GroundGrid& grid);

namespace reference {

WarpResult warp_image(const ImageBuffer& img, const Homography& h, std::size_t out_w,
                      std::size_t out_h);

GroundProjection project_to_ground(const ImageBuffer& img, const Homography& t_grid,
                                   const GroundGrid& grid);

}  // namespace reference

}  // namespace mvaug
