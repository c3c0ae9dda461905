#include "mvaug/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>
#include <json.hpp>

namespace mvaug::io {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    parse_fail(where + ": " + e.what());
  }
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) parse_fail(what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) parse_fail(what + " must be finite");
  return v;
}

std::int64_t integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) parse_fail(what + " must be an integer");
  return j.get<std::int64_t>();
}

std::size_t count(const json& j, const std::string& what) {
  const std::int64_t v = integer(j, what);
  if (v < 0) parse_fail(what + " must be non-negative");
  return static_cast<std::size_t>(v);
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != N) parse_fail(what + " must be an array of " + std::to_string(N));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], what);
  return out;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) parse_fail(where + ": missing \"" + key + "\"");
  return obj.at(key);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

constexpr std::string_view kGridMagic{"MVGRID1\0", 8};

json grid_to_json(const GroundGrid& g) {
  return {{"rows", g.rows}, {"cols", g.cols}, {"cell_size", g.cell_size},
          {"origin", {g.origin_x, g.origin_y}}};
}

GroundGrid grid_from_json(const json& j, GroundGrid g) {
  if (!j.is_object()) parse_fail("grid must be an object");
  if (j.contains("rows")) g.rows = count(j["rows"], "grid.rows");
  if (j.contains("cols")) g.cols = count(j["cols"], "grid.cols");
  if (j.contains("cell_size")) g.cell_size = number(j["cell_size"], "grid.cell_size");
  if (j.contains("origin")) {
    const auto o = numbers<2>(j["origin"], "grid.origin");
    g.origin_x = o[0];
    g.origin_y = o[1];
  }
  try {
    g.validate();
  } catch (const Error& e) {
    parse_fail(e.what());
  }
  return g;
}

json homography_to_json(const Homography& h) { return h.row_major(); }

Homography homography_from_json(const json& j, const std::string& what) {
  try {
    return Homography::from_row_major(numbers<9>(j, what));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    parse_fail(what + ": " + e.what());
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot move output into place at " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- calibration -----------------------------------------------------------

CameraCalibration parse_calibration(std::string_view json_text) {
  const json j = parse_json(json_text, "calibration");
  if (!j.is_object()) parse_fail("calibration must be a JSON object");
  CameraCalibration cam;
  const auto k = numbers<9>(field(j, "K", "calibration"), "K");
  cam.K << k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7], k[8];
  if (j.contains("rvec")) {
    const auto r = numbers<3>(j["rvec"], "rvec");
    cam.R = rodrigues_to_rotation({r[0], r[1], r[2]});
  } else if (j.contains("R")) {
    const auto r = numbers<9>(j["R"], "R");
    cam.R << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    const double err = (cam.R.transpose() * cam.R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= 1e-6) || !(cam.R.determinant() > 0.0)) {
      throw Error(ErrorCode::InvalidCalibration, "R is not a rotation matrix");
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cam.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    cam.R = svd.matrixU() * svd.matrixV().transpose();
  } else {
    parse_fail("calibration needs \"rvec\" or \"R\"");
  }
  const auto t = numbers<3>(field(j, "t", "calibration"), "t");
  cam.t = Eigen::Vector3d(t[0], t[1], t[2]);
  cam.validate();
  return cam;
}

CameraCalibration load_calibration(const fs::path& path) { return parse_calibration(read_file(path)); }

std::string format_calibration(const CameraCalibration& cam) {
  json j;
  j["K"] = json::array();
  j["R"] = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      j["K"].push_back(cam.K(r, c));
      j["R"].push_back(cam.R(r, c));
    }
  }
  j["t"] = {cam.t.x(), cam.t.y(), cam.t.z()};
  return j.dump(2) + "\n";
}

void save_calibration(const fs::path& path, const CameraCalibration& cam) {
  write_file_atomic(path, format_calibration(cam));
}

// --- annotations -------------------------------------------------------------

std::vector<Annotation> parse_annotations(std::string_view text) {
  std::vector<Annotation> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "annotations line " + std::to_string(line_no);
    try {
      const json j = parse_json(line, where);
      Annotation a;
      a.frame = integer(field(j, "frame", where), "frame");
      a.id = integer(field(j, "id", where), "id");
      const auto w = numbers<2>(field(j, "world", where), "world");
      a.world = {w[0], w[1]};
      if (j.contains("views")) {
        if (!j["views"].is_object()) parse_fail("views must be an object");
        for (const auto& [key, value] : j["views"].items()) {
          std::int64_t view = 0;
          try {
            std::size_t used = 0;
            view = std::stoll(key, &used);
            if (used != key.size()) parse_fail("view id must be an integer");
          } catch (const std::logic_error&) {
            parse_fail("view id must be an integer");
          }
          const auto px = numbers<2>(value, "view pixel");
          a.views[view] = {px[0], px[1]};
        }
      }
      out.push_back(std::move(a));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      const std::string msg = e.what();
      parse_fail(msg.find(where) == std::string::npos ? where + ": " + msg : msg);
    }
  }
  return out;
}

std::vector<Annotation> load_annotations(const fs::path& path) {
  return parse_annotations(read_file(path));
}

std::string format_annotations(std::span<const Annotation> anns) {
  std::string out;
  for (const Annotation& a : anns) {
    json j;
    j["frame"] = a.frame;
    j["id"] = a.id;
    j["world"] = {a.world.x, a.world.y};
    j["views"] = json::object();
    for (const auto& [view, px] : a.views) j["views"][std::to_string(view)] = {px.x, px.y};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_annotations(const fs::path& path, std::span<const Annotation> anns) {
  write_file_atomic(path, format_annotations(anns));
}

// --- MVGRID1 -----------------------------------------------------------------

std::string encode_grid_raster(const ImageBuffer& raster) {
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty raster");
  std::string out(kGridMagic);
  put_u32(out, static_cast<std::uint32_t>(raster.height()));
  put_u32(out, static_cast<std::uint32_t>(raster.width()));
  put_u32(out, static_cast<std::uint32_t>(raster.channels()));
  out.reserve(out.size() + 4 * raster.data().size());
  for (float f : raster.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

ImageBuffer decode_grid_raster(std::string_view bytes) {
  if (bytes.size() < kGridMagic.size()) parse_fail("raster shorter than its magic");
  if (bytes.substr(0, kGridMagic.size()) != kGridMagic) {
    throw Error(ErrorCode::VersionMismatch, "not an MVGRID1 raster");
  }
  constexpr std::size_t header = 20;
  if (bytes.size() < header) parse_fail("truncated MVGRID1 header");
  const std::size_t rows = get_u32(bytes, 8), cols = get_u32(bytes, 12), ch = get_u32(bytes, 16);
  if (rows == 0 || cols == 0 || ch == 0) parse_fail("MVGRID1 raster with zero extent");
  const std::size_t n = rows * cols * ch;
  if (bytes.size() != header + 4 * n) parse_fail("MVGRID1 payload length mismatch");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
    if (!std::isfinite(data[i])) parse_fail("MVGRID1 raster contains a non-finite sample");
  }
  return ImageBuffer(rows, cols, ch, std::move(data));
}

void save_grid_raster(const fs::path& path, const ImageBuffer& raster) {
  write_file_atomic(path, encode_grid_raster(raster));
}

ImageBuffer load_grid_raster(const fs::path& path) { return decode_grid_raster(read_file(path)); }

// --- detections --------------------------------------------------------------

std::vector<DetectionRecord> to_records(const DetectionSet& set, const GroundGrid& grid) {
  std::vector<DetectionRecord> out;
  out.reserve(set.detections.size());
  for (const Detection& d : set.detections) {
    out.push_back({set.frame, d.cell, grid.grid_to_ground(d.cell), d.score});
  }
  return out;
}

std::string format_detections(std::span<const DetectionRecord> recs) {
  std::string out;
  for (const DetectionRecord& r : recs) {
    json j;
    j["frame"] = r.frame;
    j["cell"] = {r.cell.x, r.cell.y};
    j["world"] = {r.world.x, r.world.y};
    j["score"] = r.score;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<DetectionRecord> parse_detections(std::string_view text) {
  std::vector<DetectionRecord> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "detections line " + std::to_string(line_no);
    const json j = parse_json(line, where);
    DetectionRecord r;
    r.frame = integer(field(j, "frame", where), where + " frame");
    const auto c = numbers<2>(field(j, "cell", where), where + " cell");
    const auto w = numbers<2>(field(j, "world", where), where + " world");
    r.cell = {c[0], c[1]};
    r.world = {w[0], w[1]};
    r.score = number(field(j, "score", where), where + " score");
    out.push_back(r);
  }
  return out;
}

void save_detections(const fs::path& path, std::span<const DetectionRecord> recs) {
  write_file_atomic(path, format_detections(recs));
}

std::vector<DetectionRecord> load_detections(const fs::path& path) {
  return parse_detections(read_file(path));
}

// --- PNG ---------------------------------------------------------------------

ImageBuffer load_png(const fs::path& path) {
  const std::string bytes = read_file(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    parse_fail("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t ch = color ? 3 : 1;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    parse_fail("cannot decode PNG " + path.string() + ": " + image.message);
  }
  std::vector<float> data(buf.size());
  std::transform(buf.begin(), buf.end(), data.begin(),
                 [](unsigned char v) { return static_cast<float>(v) / 255.0f; });
  return ImageBuffer(image.height, image.width, ch, std::move(data));
}

std::string encode_png(const ImageBuffer& img) {
  if (img.empty() || (img.channels() != 1 && img.channels() != 3)) {
    throw Error(ErrorCode::ShapeMismatch, "PNG output needs 1 or 3 channels");
  }
  std::vector<unsigned char> buf(img.data().size());
  std::transform(img.data().begin(), img.data().end(), buf.begin(), [](float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
  });
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void save_png(const fs::path& path, const ImageBuffer& img) { write_file_atomic(path, encode_png(img)); }

// --- configs -----------------------------------------------------------------

ToolConfig parse_tool_config(std::string_view json_text) {
  const json j = parse_json(json_text, "config");
  if (!j.is_object()) parse_fail("config must be a JSON object");
  ToolConfig cfg;
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(count(j["seed"], "seed"));
  cfg.scene.seed = cfg.seed;
  if (j.contains("scene")) {
    const json& s = j["scene"];
    if (!s.is_object()) parse_fail("scene must be an object");
    SceneConfig& sc = cfg.scene;
    const auto real = [&](const char* key, double& dst) {
      if (s.contains(key)) dst = number(s[key], std::string("scene.") + key);
    };
    const auto whole = [&](const char* key, std::size_t& dst) {
      if (s.contains(key)) dst = count(s[key], std::string("scene.") + key);
    };
    real("area_w", sc.area_w);
    real("area_h", sc.area_h);
    whole("n_cameras", sc.n_cameras);
    real("camera_height", sc.camera_height);
    real("camera_ring_radius", sc.camera_ring_radius);
    whole("n_pedestrians", sc.n_pedestrians);
    whole("n_frames", sc.n_frames);
    whole("image_w", sc.image_w);
    whole("image_h", sc.image_h);
    real("focal_px", sc.focal_px);
    real("heat_sigma_px", sc.heat_sigma_px);
    if (s.contains("seed")) sc.seed = static_cast<std::uint64_t>(count(s["seed"], "scene.seed"));
    try {
      sc.validate();
    } catch (const Error& e) {
      parse_fail(e.what());
    }
  }
  if (j.contains("augmentation")) {
    const json& a = j["augmentation"];
    if (!a.is_object()) parse_fail("augmentation must be an object");
    AugmentationRanges& r = cfg.augmentation;
    const auto real = [&](const char* key, double& dst) {
      if (a.contains(key)) dst = number(a[key], std::string("augmentation.") + key);
    };
    const auto range = [&](const char* key, double& lo, double& hi) {
      if (a.contains(key)) {
        const auto v = numbers<2>(a[key], std::string("augmentation.") + key);
        lo = v[0];
        hi = v[1];
      }
    };
    real("max_rotation_deg", r.max_rotation_deg);
    real("max_translate_frac", r.max_translate_frac);
    range("scale_range", r.scale_min, r.scale_max);
    real("max_shear_deg", r.max_shear_deg);
    range("crop_area_range", r.crop_area_min, r.crop_area_max);
    range("crop_aspect_range", r.crop_aspect_min, r.crop_aspect_max);
    real("perspective_distortion", r.perspective_distortion);
    real("view_proportion", r.view_proportion);
    real("scene_proportion", r.scene_proportion);
    try {
      r.validate();
    } catch (const Error& e) {
      parse_fail(e.what());
    }
  }
  cfg.grid = cfg.scene.default_grid();
  if (j.contains("grid")) cfg.grid = grid_from_json(j["grid"], cfg.grid);
  return cfg;
}

ToolConfig load_tool_config(const fs::path& path) { return parse_tool_config(read_file(path)); }

std::string format_tool_config(const ToolConfig& cfg) {
  const SceneConfig& s = cfg.scene;
  const AugmentationRanges& a = cfg.augmentation;
  json j;
  j["seed"] = cfg.seed;
  j["scene"] = {{"area_w", s.area_w},
                {"area_h", s.area_h},
                {"n_cameras", s.n_cameras},
                {"camera_height", s.camera_height},
                {"camera_ring_radius", s.camera_ring_radius},
                {"n_pedestrians", s.n_pedestrians},
                {"n_frames", s.n_frames},
                {"image_w", s.image_w},
                {"image_h", s.image_h},
                {"focal_px", s.focal_px},
                {"heat_sigma_px", s.heat_sigma_px},
                {"seed", s.seed}};
  j["augmentation"] = {{"max_rotation_deg", a.max_rotation_deg},
                       {"max_translate_frac", a.max_translate_frac},
                       {"scale_range", {a.scale_min, a.scale_max}},
                       {"max_shear_deg", a.max_shear_deg},
                       {"crop_area_range", {a.crop_area_min, a.crop_area_max}},
                       {"crop_aspect_range", {a.crop_aspect_min, a.crop_aspect_max}},
                       {"perspective_distortion", a.perspective_distortion},
                       {"view_proportion", a.view_proportion},
                       {"scene_proportion", a.scene_proportion}};
  j["grid"] = grid_to_json(cfg.grid);
  return j.dump(2) + "\n";
}

void DatasetDescriptor::validate() const {
  if (views.empty()) throw Error(ErrorCode::InvalidArgument, "dataset needs at least one view");
  grid.validate();
}

DatasetDescriptor load_dataset(const fs::path& path) {
  const json j = parse_json(read_file(path), "dataset " + path.string());
  if (!j.is_object()) parse_fail("dataset must be a JSON object");
  const fs::path base = path.parent_path();
  DatasetDescriptor d;
  const json& views = field(j, "views", "dataset");
  if (!views.is_array()) parse_fail("dataset views must be an array");
  for (const json& v : views) {
    const json& cal = field(v, "calibration", "dataset view");
    const json& img = field(v, "images", "dataset view");
    if (!cal.is_string() || !img.is_string()) parse_fail("dataset view paths must be strings");
    d.views.push_back({base / cal.get<std::string>(), base / img.get<std::string>()});
  }
  d.grid = grid_from_json(field(j, "grid", "dataset"), GroundGrid{});
  const json& ann = field(j, "annotations", "dataset");
  if (!ann.is_string()) parse_fail("dataset annotations must be a path");
  d.annotations = base / ann.get<std::string>();
  if (j.contains("resize")) {
    const auto r = numbers<2>(j["resize"], "resize");
    if (r[0] < 0 || r[1] < 0) parse_fail("resize must be non-negative");
    d.resize_w = static_cast<std::size_t>(r[0]);
    d.resize_h = static_cast<std::size_t>(r[1]);
  }
  if (j.contains("frames")) {
    if (!j["frames"].is_array()) parse_fail("frames must be an array");
    for (const json& f : j["frames"]) d.frames.push_back(integer(f, "frame"));
  }
  if (j.contains("projections")) {
    if (!j["projections"].is_string()) parse_fail("projections must be a path");
    d.projections = base / j["projections"].get<std::string>();
  }
  try {
    d.validate();
  } catch (const Error& e) {
    parse_fail(e.what());
  }
  return d;
}

void save_dataset(const fs::path& path, const DatasetDescriptor& d) {
  const fs::path base = path.parent_path();
  const auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  json j;
  j["views"] = json::array();
  for (const DatasetView& v : d.views) {
    j["views"].push_back({{"calibration", rel(v.calibration)}, {"images", rel(v.images)}});
  }
  j["grid"] = grid_to_json(d.grid);
  j["annotations"] = rel(d.annotations);
  j["resize"] = {d.resize_w, d.resize_h};
  j["frames"] = d.frames;
  if (d.projections) j["projections"] = rel(*d.projections);
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string frame_file_name(std::int64_t frame, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05lld", static_cast<long long>(frame));
  return std::string(buf) + std::string(ext);
}

std::string format_frame_projections(const FrameProjections& p) {
  json j;
  j["frame"] = p.frame;
  j["views"] = json::array();
  for (const Homography& h : p.views) j["views"].push_back(homography_to_json(h));
  j["view_augmentations"] = json::array();
  for (const ViewAugmentation& a : p.view_augmentations) {
    j["view_augmentations"].push_back(
        {{"kind", std::string(to_string(a.kind))}, {"h", homography_to_json(a.h)}});
  }
  j["scene"] = homography_to_json(p.scene);
  j["scene_kind"] = std::string(to_string(p.scene_kind));
  return j.dump(2) + "\n";
}

FrameProjections load_frame_projections(const fs::path& path) {
  const json j = parse_json(read_file(path), path.string());
  FrameProjections p;
  p.frame = integer(field(j, "frame", path.string()), "frame");
  const json& views = field(j, "views", path.string());
  if (!views.is_array()) parse_fail("projection views must be an array");
  for (const json& v : views) p.views.push_back(homography_from_json(v, "view projection"));
  if (j.contains("scene")) p.scene = homography_from_json(j["scene"], "scene homography");
  const auto kind = [](const json& k) {
    const auto parsed = k.is_string() ? parse_augmentation_kind(k.get<std::string>()) : std::nullopt;
    if (!parsed) parse_fail("unknown augmentation kind");
    return *parsed;
  };
  if (j.contains("scene_kind")) p.scene_kind = kind(j["scene_kind"]);
  if (j.contains("view_augmentations")) {
    for (const json& a : j["view_augmentations"]) {
      ViewAugmentation va;
      va.kind = kind(field(a, "kind", "view augmentation"));
      va.h = homography_from_json(field(a, "h", "view augmentation"), "view augmentation");
      p.view_augmentations.push_back(va);
    }
  }
  return p;
}

ImageBuffer resize_image(const ImageBuffer& img, std::size_t w, std::size_t h,
                         Homography* scale_out) {
  if (w == 0 || h == 0) throw Error(ErrorCode::InvalidArgument, "resize target must be positive");
  const auto ratio = [](std::size_t src, std::size_t dst) {
    return dst > 1 ? (static_cast<double>(src) - 1.0) / (static_cast<double>(dst) - 1.0) : 1.0;
  };
  const Homography s = Homography::scaling(ratio(img.width(), w), ratio(img.height(), h));
  if (scale_out) *scale_out = s;
  return warp_image(img, s, w, h).image;
}

ValidMask load_mask_png(const fs::path& path) {
  const ImageBuffer img = load_png(path);
  ValidMask m(img.height(), img.width());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) m.set(r, c, img.at(r, c, 0) > 0.0f);
  }
  return m;
}

void save_mask_png(const fs::path& path, const ValidMask& mask) {
  ImageBuffer img(mask.height(), mask.width());
  for (std::size_t r = 0; r < mask.height(); ++r) {
    for (std::size_t c = 0; c < mask.width(); ++c) img.at(r, c) = mask.at(r, c) ? 1.0f : 0.0f;
  }
  save_png(path, img);
}

FrameInputs load_frame_inputs(const DatasetDescriptor& d, std::int64_t frame) {
  FrameInputs in;
  std::optional<FrameProjections> proj;
  if (d.projections) {
    proj = load_frame_projections(*d.projections / frame_file_name(frame, ".json"));
    if (proj->views.size() != d.views.size()) {
      throw Error(ErrorCode::ShapeMismatch, "projection file view count differs from dataset");
    }
  }
  for (std::size_t v = 0; v < d.views.size(); ++v) {
    ImageBuffer img = load_png(d.views[v].images / frame_file_name(frame, ".png"));
    const fs::path mask_path = d.views[v].images / frame_file_name(frame, ".mask.png");
    ValidMask mask = fs::exists(mask_path) ? load_mask_png(mask_path)
                                           : ValidMask(img.height(), img.width(), true);
    if (mask.height() != img.height() || mask.width() != img.width()) {
      throw Error(ErrorCode::ShapeMismatch, "mask dimensions differ from " + mask_path.string());
    }
    Homography t = proj ? proj->views[v]
                        : grid_projection(load_calibration(d.views[v].calibration), d.grid);
    Homography s;
    if (d.resize_w > 0 && d.resize_h > 0 &&
        (img.width() != d.resize_w || img.height() != d.resize_h)) {
      img = resize_image(img, d.resize_w, d.resize_h, &s);
      mask = warp_mask(mask, s, d.resize_w, d.resize_h);
      t = compose(invert(s), t);
    }
    in.images.push_back(std::move(img));
    in.masks.push_back(std::move(mask));
    in.t_grids.push_back(t);
    in.resize.push_back(s);
  }
  return in;
}

std::string format_metrics_text(const MetricsReport& m) {
  std::ostringstream os;
  os.precision(17);
  os << "moda=" << m.moda << "\nmodp=" << m.modp << "\nprecision=" << m.precision
     << "\nrecall=" << m.recall << "\ntp=" << m.tp << "\nfp=" << m.fp << "\nfn=" << m.fn
     << "\ngt=" << m.gt << "\n";
  return os.str();
}

std::string format_metrics_json(const MetricsReport& m, double threshold_m) {
  const json j = {{"moda", m.moda},         {"modp", m.modp}, {"precision", m.precision},
                  {"recall", m.recall},     {"tp", m.tp},     {"fp", m.fp},
                  {"fn", m.fn},             {"gt", m.gt},     {"threshold_m", threshold_m}};
  return j.dump(2) + "\n";
}

}  // namespace mvaug::io
