#pragma once

// On-disk formats: JSON calibration, line-delimited JSON annotations and
// detections, MVGRID1 rasters, PNG images, and the tool/dataset configs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvaug/augmentation.hpp"
#include "mvaug/eval.hpp"
#include "mvaug/geometry.hpp"
#include "mvaug/pipeline.hpp"
#include "mvaug/synth.hpp"
#include "mvaug/warp.hpp"

namespace mvaug::io {

namespace fs = std::filesystem;

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

// {"K": [9], "rvec": [3] | "R": [9], "t": [3]}. A rotation within 1e-6 of
// orthonormal is re-orthonormalized; anything worse is InvalidCalibration.
CameraCalibration parse_calibration(std::string_view json_text);
CameraCalibration load_calibration(const fs::path& path);
std::string format_calibration(const CameraCalibration& cam);
void save_calibration(const fs::path& path, const CameraCalibration& cam);

struct Annotation {
  std::int64_t frame = 0;
  std::int64_t id = 0;
  Point2 world;                      // meters
  std::map<std::int64_t, Point2> views;  // view id -> feet pixel; absent = not visible
};

// One JSON object per line:
// {"frame": int, "id": int, "world": [x, y], "views": {"<view>": [u, v]}}
std::vector<Annotation> parse_annotations(std::string_view text);
std::vector<Annotation> load_annotations(const fs::path& path);
std::string format_annotations(std::span<const Annotation> anns);
void save_annotations(const fs::path& path, std::span<const Annotation> anns);

// MVGRID1: "MVGRID1\0", u32 rows, u32 cols, u32 channels (little-endian),
// then rows*cols*channels little-endian float32, row-major, interleaved.
std::string encode_grid_raster(const ImageBuffer& raster);
ImageBuffer decode_grid_raster(std::string_view bytes);
void save_grid_raster(const fs::path& path, const ImageBuffer& raster);
ImageBuffer load_grid_raster(const fs::path& path);

struct DetectionRecord {
  std::int64_t frame = 0;
  Point2 cell;
  Point2 world;
  double score = 0.0;
};

std::vector<DetectionRecord> to_records(const DetectionSet& set, const GroundGrid& grid);
// {"frame": int, "cell": [x, y], "world": [x_m, y_m], "score": s} per line.
std::string format_detections(std::span<const DetectionRecord> recs);
std::vector<DetectionRecord> parse_detections(std::string_view text);
void save_detections(const fs::path& path, std::span<const DetectionRecord> recs);
std::vector<DetectionRecord> load_detections(const fs::path& path);

// 8-bit grayscale or RGB PNG <-> normalized float raster.
ImageBuffer load_png(const fs::path& path);
std::string encode_png(const ImageBuffer& img);
void save_png(const fs::path& path, const ImageBuffer& img);

struct ToolConfig {
  SceneConfig scene;
  AugmentationRanges augmentation;
  GroundGrid grid;
  std::uint64_t seed = 0;
};

// Every section and field is optional; missing values keep their defaults.
// The grid defaults to scene.default_grid().
ToolConfig parse_tool_config(std::string_view json_text);
ToolConfig load_tool_config(const fs::path& path);
std::string format_tool_config(const ToolConfig& cfg);

struct DatasetView {
  fs::path calibration;
  fs::path images;
};

// Paths are stored relative to the descriptor and resolved on load.
struct DatasetDescriptor {
  std::vector<DatasetView> views;
  GroundGrid grid;
  fs::path annotations;
  std::size_t resize_w = 0;
  std::size_t resize_h = 0;
  std::vector<std::int64_t> frames;
  // Optional per-frame grid projections overriding the calibrations.
  std::optional<fs::path> projections;

  void validate() const;
};

DatasetDescriptor load_dataset(const fs::path& path);
void save_dataset(const fs::path& path, const DatasetDescriptor& d);

std::string frame_file_name(std::int64_t frame, std::string_view ext);

// Per-frame projection file written by the augment command:
// {"frame": f, "views": [[9], ...], "view_augmentations": [{"kind", "h"}],
//  "scene": [9], "scene_kind": k}. `views` holds the compensated grid
// projections; the augmentation fields are informational.
struct FrameProjections {
  std::int64_t frame = 0;
  std::vector<Homography> views;
  std::vector<ViewAugmentation> view_augmentations;
  Homography scene;
  AugmentationKind scene_kind = AugmentationKind::None;
};

std::string format_frame_projections(const FrameProjections& p);
FrameProjections load_frame_projections(const fs::path& path);

// Binary mask <-> 8-bit grayscale PNG (255 = valid).
ValidMask load_mask_png(const fs::path& path);
void save_mask_png(const fs::path& path, const ValidMask& mask);

// Corner-aligned bilinear resize; with `scale_out` receiving the homography
// from resized pixels to source pixels.
ImageBuffer resize_image(const ImageBuffer& img, std::size_t w, std::size_t h,
                         Homography* scale_out = nullptr);

// Grid projections and images of one dataset frame, resized to the
// descriptor's target with the projections compensated accordingly.
struct FrameInputs {
  std::vector<ImageBuffer> images;
  std::vector<Homography> t_grids;
  // Per view, resized pixels -> stored pixels (identity when not resized).
  std::vector<Homography> resize;
  // Per view, pixels carrying image content. Read from "<frame>.mask.png"
  // when present (nonzero = valid), otherwise all valid.
  std::vector<ValidMask> masks;
};

FrameInputs load_frame_inputs(const DatasetDescriptor& d, std::int64_t frame);

// Flat "key=value" lines and a JSON object for a metrics report.
std::string format_metrics_text(const MetricsReport& m);
std::string format_metrics_json(const MetricsReport& m, double threshold_m);

}  // namespace mvaug::io
