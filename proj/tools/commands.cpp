#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvaug/augmentation.hpp"
#include "mvaug/cli.hpp"
#include "mvaug/eval.hpp"
#include "mvaug/io.hpp"
#include "mvaug/pipeline.hpp"
#include "mvaug/synth.hpp"
#include "mvaug/warp.hpp"

namespace mvaug::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGroundTruthSigmaCells = 1.0;
constexpr std::uint64_t kSceneStream = 0x5CE17E;

struct Globals {
  bool json_output = false;
  int threads = 0;
};

void emit(const json& result, const Globals& g, std::ostream& out) {
  if (g.json_output) {
    out << result.dump(2) << "\n";
    return;
  }
  for (const auto& [key, value] : result.items()) {
    out << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  }
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) {
    throw Error(ErrorCode::IoError, "cannot create directory " + p.string());
  }
}

std::string kind_validator(const std::string& s) {
  return parse_augmentation_kind(s) ? std::string{} : "unknown augmentation kind '" + s + "'";
}

std::map<std::int64_t, std::vector<io::Annotation>> by_frame(std::vector<io::Annotation> anns) {
  std::map<std::int64_t, std::vector<io::Annotation>> out;
  for (auto& a : anns) out[a.frame].push_back(std::move(a));
  return out;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

json cmd_synth(const SynthArgs& a) {
  io::ToolConfig cfg = io::load_tool_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.scene.seed = *a.seed;
  }
  const SyntheticScene scene = generate_scene(cfg.scene);
  const SceneConfig& sc = cfg.scene;
  const fs::path out = a.out;
  make_dirs(out / "calibrations");
  make_dirs(out / "ground_truth");

  io::DatasetDescriptor d;
  d.grid = cfg.grid;
  d.annotations = out / "annotations.jsonl";
  d.resize_w = sc.image_w;
  d.resize_h = sc.image_h;
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    const fs::path cal = out / "calibrations" / ("cam_" + std::to_string(v) + ".json");
    const fs::path views = out / "views" / std::to_string(v);
    make_dirs(views);
    io::save_calibration(cal, scene.cameras[v]);
    d.views.push_back({cal, views});
  }

  std::vector<io::Annotation> anns;
  const double w = static_cast<double>(sc.image_w), h = static_cast<double>(sc.image_h);
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const auto frame = static_cast<std::int64_t>(f);
    d.frames.push_back(frame);
    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
      const ImageBuffer heat = render_view_heatmap(scene, v, f, sc.heat_sigma_px);
      io::save_png(d.views[v].images / io::frame_file_name(frame, ".png"), heat);
      io::save_grid_raster(d.views[v].images / io::frame_file_name(frame, ".mvgrid"), heat);
    }
    const GroundMap gt = render_ground_truth(scene, f, cfg.grid, kGroundTruthSigmaCells);
    io::save_grid_raster(out / "ground_truth" / io::frame_file_name(frame, ".mvgrid"), gt.values);
    for (const Pedestrian& p : scene.frames[f]) {
      io::Annotation ann{frame, static_cast<std::int64_t>(p.id), p.world, {}};
      for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        const auto px = project_ground_point(scene.cameras[v], p.world);
        if (px && px->x >= 0.0 && px->y >= 0.0 && px->x <= w - 1.0 && px->y <= h - 1.0) {
          ann.views[static_cast<std::int64_t>(v)] = *px;
        }
      }
      anns.push_back(std::move(ann));
    }
  }
  io::save_annotations(d.annotations, anns);
  io::write_file_atomic(out / "config.json", io::format_tool_config(cfg));
  io::save_dataset(out / "dataset.json", d);

  return {{"command", "synth"},
          {"seed", cfg.scene.seed},
          {"cameras", scene.cameras.size()},
          {"frames", scene.frames.size()},
          {"pedestrians", sc.n_pedestrians},
          {"dataset", (out / "dataset.json").string()}};
}

// --- augment -----------------------------------------------------------------

struct AugmentArgs {
  std::string dataset;
  std::string view_aug = "affine";
  std::string scene_aug = "affine";
  double proportion = 0.5;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

json cmd_augment(const AugmentArgs& a) {
  const io::DatasetDescriptor src = io::load_dataset(a.dataset);
  const AugmentationKind view_kind = *parse_augmentation_kind(a.view_aug);
  const AugmentationKind scene_kind = *parse_augmentation_kind(a.scene_aug);
  AugmentationRanges ranges = a.config.empty() ? AugmentationRanges{}
                                               : io::load_tool_config(a.config).augmentation;
  ranges.view_proportion = a.proportion;
  ranges.scene_proportion = a.proportion;
  ranges.validate();

  const fs::path out = a.out;
  make_dirs(out / "calibrations");
  make_dirs(out / "projections");
  io::DatasetDescriptor dst;
  dst.grid = src.grid;
  dst.frames = src.frames;
  dst.annotations = out / "annotations.jsonl";
  dst.projections = out / "projections";
  for (std::size_t v = 0; v < src.views.size(); ++v) {
    const fs::path cal = out / "calibrations" / ("cam_" + std::to_string(v) + ".json");
    io::save_calibration(cal, io::load_calibration(src.views[v].calibration));
    const fs::path views = out / "views" / std::to_string(v);
    make_dirs(views);
    dst.views.push_back({cal, views});
  }

  const auto anns = by_frame(io::load_annotations(src.annotations));
  std::vector<io::Annotation> out_anns;
  std::size_t view_augmented = 0, scene_augmented = 0, view_draws = 0;
  for (std::int64_t frame : src.frames) {
    const auto uframe = static_cast<std::uint64_t>(frame);
    io::FrameInputs in = io::load_frame_inputs(src, frame);
    Rng scene_rng = Rng::derive(a.seed, {uframe, kSceneStream});
    const SceneAugmentation sa = sample_scene_augmentation(scene_kind, ranges, src.grid, scene_rng);
    scene_augmented += sa.kind != AugmentationKind::None ? 1 : 0;

    io::FrameProjections proj;
    proj.frame = frame;
    proj.scene = sa.h;
    proj.scene_kind = sa.kind;
    for (std::size_t v = 0; v < in.images.size(); ++v) {
      const ImageBuffer& img = in.images[v];
      dst.resize_w = img.width();
      dst.resize_h = img.height();
      Rng view_rng = Rng::derive(a.seed, {uframe, static_cast<std::uint64_t>(v)});
      const ViewAugmentation va =
          sample_view_augmentation(view_kind, ranges, static_cast<double>(img.width()),
                                   static_cast<double>(img.height()), view_rng);
      ++view_draws;
      view_augmented += va.kind != AugmentationKind::None ? 1 : 0;
      const bool identity = va.kind == AugmentationKind::None && sa.kind == AugmentationKind::None;
      proj.views.push_back(identity ? in.t_grids[v] : augment_projection(in.t_grids[v], va.h, sa.h));
      proj.view_augmentations.push_back(va);
      const fs::path stem = dst.views[v].images / io::frame_file_name(frame, "");
      if (va.kind == AugmentationKind::None) {
        io::save_png(stem.string() + ".png", img);
        if (!std::all_of(in.masks[v].data().begin(), in.masks[v].data().end(),
                         [](std::uint8_t b) { return b != 0; })) {
          io::save_mask_png(stem.string() + ".mask.png", in.masks[v]);
        }
      } else {
        const WarpResult warped = warp_image(img, va.h, img.width(), img.height());
        ValidMask mask = warp_mask(in.masks[v], va.h, img.width(), img.height());
        for (std::size_t i = 0; i < mask.data().size(); ++i) mask.data()[i] &= warped.mask.data()[i];
        io::save_png(stem.string() + ".png", warped.image);
        io::save_mask_png(stem.string() + ".mask.png", mask);
      }
    }
    io::write_file_atomic(*dst.projections / io::frame_file_name(frame, ".json"),
                          io::format_frame_projections(proj));

    const auto it = anns.find(frame);
    if (it == anns.end()) continue;
    for (const io::Annotation& ann : it->second) {
      const Point2 cell = src.grid.ground_to_grid(ann.world);
      const auto moved = transform_scene_annotations(std::span(&cell, 1), sa.h, src.grid);
      if (!moved[0].visible) continue;
      io::Annotation o{ann.frame, ann.id, src.grid.grid_to_ground(moved[0].p), {}};
      for (const auto& [view, px] : ann.views) {
        if (view < 0 || static_cast<std::size_t>(view) >= in.images.size()) continue;
        const auto uv = static_cast<std::size_t>(view);
        // Stored pixels -> resized pixels -> augmented pixels.
        const Point2 resized = invert(in.resize[uv]).apply(px);
        const auto t = transform_view_annotations(
            std::span(&resized, 1), proj.view_augmentations[uv].h,
            static_cast<double>(in.images[uv].width()), static_cast<double>(in.images[uv].height()));
        if (t[0].visible) o.views[view] = t[0].p;
      }
      out_anns.push_back(std::move(o));
    }
  }
  io::save_annotations(dst.annotations, out_anns);
  io::save_dataset(out / "dataset.json", dst);

  return {{"command", "augment"},
          {"seed", a.seed},
          {"view_aug", a.view_aug},
          {"scene_aug", a.scene_aug},
          {"proportion", a.proportion},
          {"frames", src.frames.size()},
          {"view_draws", view_draws},
          {"view_augmented", view_augmented},
          {"scene_augmented", scene_augmented},
          {"dataset", (out / "dataset.json").string()}};
}

// --- detect ------------------------------------------------------------------

struct DetectArgs {
  std::string dataset;
  std::string aggregation = "mean";
  double nms_radius = 0.0;
  std::string out;
};

json cmd_detect(const DetectArgs& a) {
  const io::DatasetDescriptor d = io::load_dataset(a.dataset);
  DetectionOptions opts;
  opts.mode = a.aggregation == "max" ? AggregationMode::Max : AggregationMode::Mean;
  opts.nms_radius = a.nms_radius > 0.0 ? a.nms_radius : default_nms_radius(d.grid);
  std::vector<io::DetectionRecord> recs;
  for (std::int64_t frame : d.frames) {
    const io::FrameInputs in = io::load_frame_inputs(d, frame);
    const DetectionSet dets = run_detection_full(in.images, in.t_grids, d.grid, opts, frame, in.masks).detections;
    const auto r = io::to_records(dets, d.grid);
    recs.insert(recs.end(), r.begin(), r.end());
  }
  io::save_detections(a.out, recs);
  return {{"command", "detect"},
          {"aggregation", a.aggregation},
          {"nms_radius", opts.nms_radius},
          {"frames", d.frames.size()},
          {"detections", recs.size()},
          {"out", a.out}};
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string detections;
  std::string gt;
  double threshold_m = kDefaultMatchThreshold;
  std::string report;
};

json cmd_eval(const EvalArgs& a) {
  const auto dets = io::load_detections(a.detections);
  const auto gt = by_frame(io::load_annotations(a.gt));
  std::map<std::int64_t, std::vector<Point2>> det_frames;
  for (const auto& r : dets) {
    if (!gt.contains(r.frame)) {
      throw Error(ErrorCode::ShapeMismatch,
                  "detections reference frame " + std::to_string(r.frame) + " absent from ground truth");
    }
    det_frames[r.frame].push_back(r.world);
  }
  std::vector<FrameMatch> matches;
  for (const auto& [frame, anns] : gt) {
    std::vector<Point2> gts;
    for (const auto& ann : anns) gts.push_back(ann.world);
    const auto it = det_frames.find(frame);
    const std::vector<Point2> none;
    matches.push_back(match_detections(it == det_frames.end() ? none : it->second, gts, a.threshold_m));
  }
  const MetricsReport m = compute_metrics(matches, a.threshold_m);
  if (!a.report.empty()) io::write_file_atomic(a.report, io::format_metrics_json(m, a.threshold_m));
  return {{"command", "eval"}, {"frames", gt.size()}, {"threshold_m", a.threshold_m},
          {"moda", m.moda},    {"modp", m.modp},      {"precision", m.precision},
          {"recall", m.recall}, {"tp", m.tp},         {"fp", m.fp},
          {"fn", m.fn},        {"gt", m.gt}};
}

// --- render ------------------------------------------------------------------

struct RenderArgs {
  std::string dataset;
  std::int64_t frame = 0;
  std::size_t view = 0;
  std::string out;
  std::uint64_t seed = 0;
  std::string view_aug = "affine";
};

void paste_gray(ImageBuffer& canvas, const ImageBuffer& panel, std::size_t x_offset) {
  for (std::size_t r = 0; r < panel.height(); ++r) {
    for (std::size_t c = 0; c < panel.width(); ++c) {
      double v = 0.0;
      for (std::size_t ch = 0; ch < panel.channels(); ++ch) v += panel.at(r, c, ch);
      v /= static_cast<double>(panel.channels());
      for (std::size_t ch = 0; ch < 3; ++ch) canvas.at(r, x_offset + c, ch) = static_cast<float>(v);
    }
  }
}

json cmd_render(const RenderArgs& a) {
  const io::DatasetDescriptor d = io::load_dataset(a.dataset);
  if (std::find(d.frames.begin(), d.frames.end(), a.frame) == d.frames.end()) {
    throw Error(ErrorCode::InvalidArgument, "frame " + std::to_string(a.frame) + " not in dataset");
  }
  if (a.view >= d.views.size()) {
    throw Error(ErrorCode::InvalidArgument, "view " + std::to_string(a.view) + " not in dataset");
  }
  const io::FrameInputs in = io::load_frame_inputs(d, a.frame);
  const ImageBuffer& img = in.images[a.view];
  const std::size_t w = img.width(), h = img.height();

  AugmentationRanges ranges;
  ranges.view_proportion = 1.0;
  Rng rng = Rng::derive(a.seed, {static_cast<std::uint64_t>(a.frame), a.view});
  const ViewAugmentation va = sample_view_augmentation(
      *parse_augmentation_kind(a.view_aug), ranges, static_cast<double>(w), static_cast<double>(h), rng);
  const ImageBuffer augmented = warp_image(img, va.h, w, h).image;
  const Homography t_aug = augment_projection(in.t_grids[a.view], va.h, Homography::identity());
  const GroundProjection ground = project_to_ground(augmented, t_aug, d.grid);
  const ImageBuffer ground_panel = io::resize_image(ground.map.values, w, h);

  ImageBuffer canvas(h, 3 * w, 3);
  paste_gray(canvas, img, 0);
  paste_gray(canvas, augmented, w);
  paste_gray(canvas, ground_panel, 2 * w);

  const double sx = d.grid.cols > 1 ? (static_cast<double>(w) - 1.0) / (static_cast<double>(d.grid.cols) - 1.0) : 1.0;
  const double sy = d.grid.rows > 1 ? (static_cast<double>(h) - 1.0) / (static_cast<double>(d.grid.rows) - 1.0) : 1.0;
  std::size_t markers = 0;
  for (const io::Annotation& ann : io::load_annotations(d.annotations)) {
    if (ann.frame != a.frame) continue;
    const Point2 cell = d.grid.ground_to_grid(ann.world);
    if (!d.grid.contains(cell)) continue;
    const auto cx = static_cast<std::ptrdiff_t>(std::lround(cell.x * sx));
    const auto cy = static_cast<std::ptrdiff_t>(std::lround(cell.y * sy));
    for (int k = -1; k <= 1; ++k) {
      for (const auto& [x, y] : {std::pair{cx + k, cy}, std::pair{cx, cy + k}}) {
        if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(w) || y >= static_cast<std::ptrdiff_t>(h)) continue;
        const auto ux = 2 * w + static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
        canvas.at(uy, ux, 0) = 1.0f;
        canvas.at(uy, ux, 1) = 0.0f;
        canvas.at(uy, ux, 2) = 0.0f;
      }
    }
    ++markers;
  }
  io::save_png(a.out, canvas);
  return {{"command", "render"}, {"seed", a.seed},       {"frame", a.frame},
          {"view", a.view},      {"view_aug", a.view_aug}, {"width", 3 * w},
          {"height", h},         {"markers", markers},   {"out", a.out}};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularMatrix:
    case ErrorCode::PointAtInfinity:
    case ErrorCode::DegenerateProjection:
    case ErrorCode::DegenerateQuad:
    case ErrorCode::DegenerateLookAt:
      return kNumericFailure;
    default:
      return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration-preserving multi-view augmentation and detection tools", "mvaug"};
  app.require_subcommand(1);
  Globals globals;
  app.add_flag("--json", globals.json_output, "Print results as JSON");
  app.add_option("--threads", globals.threads, "Cap on worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic multi-camera dataset");
  s->add_option("--config", synth.config, "Tool config (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Scene seed (defaults to the config seed)");

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Apply view and scene augmentation to a dataset");
  g->add_option("--dataset", aug.dataset, "Dataset descriptor")->required()->check(CLI::ExistingFile);
  g->add_option("--view-aug", aug.view_aug, "none|hflip|vflip|affine|perspective|crop")
      ->check(kind_validator)->capture_default_str();
  g->add_option("--scene-aug", aug.scene_aug, "none|hflip|vflip|affine|perspective|crop")
      ->check(kind_validator)->capture_default_str();
  g->add_option("--proportion", aug.proportion, "Fraction of samples augmented")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  g->add_option("--seed", aug.seed, "Augmentation seed")->capture_default_str();
  g->add_option("--out", aug.out, "Output directory")->required();
  g->add_option("--config", aug.config, "Tool config providing augmentation ranges")
      ->check(CLI::ExistingFile);

  DetectArgs det;
  auto* dcmd = app.add_subcommand("detect", "Run the geometric detector on every frame");
  dcmd->add_option("--dataset", det.dataset, "Dataset descriptor")->required()->check(CLI::ExistingFile);
  dcmd->add_option("--aggregation", det.aggregation, "mean|max")
      ->check(CLI::IsMember({"mean", "max"}))->capture_default_str();
  dcmd->add_option("--nms-radius", det.nms_radius, "NMS radius in cells (0 = ceil(0.5 m / cell))")
      ->check(CLI::NonNegativeNumber);
  dcmd->add_option("--out", det.out, "Detections file (JSON lines)")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute MODA/MODP/precision/recall");
  e->add_option("--detections", ev.detections, "Detections file")->required();
  e->add_option("--gt", ev.gt, "Ground-truth annotations")->required();
  e->add_option("--threshold-m", ev.threshold_m, "Match threshold in meters")
      ->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--report", ev.report, "Report output (JSON)");

  RenderArgs rend;
  auto* r = app.add_subcommand("render", "Side-by-side view / augmented view / ground projection");
  r->add_option("--dataset", rend.dataset, "Dataset descriptor")->required()->check(CLI::ExistingFile);
  r->add_option("--frame", rend.frame, "Frame id")->required();
  r->add_option("--view", rend.view, "View index")->required();
  r->add_option("--out", rend.out, "Output PNG")->required();
  r->add_option("--seed", rend.seed, "Augmentation seed")->capture_default_str();
  r->add_option("--view-aug", rend.view_aug, "Augmentation kind shown in the middle panel")
      ->check(kind_validator)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& ex) {
    err << "mvaug: " << ex.what() << "\n";
    return kUsageError;
  }

  if (globals.threads > 0) omp_set_num_threads(globals.threads);
  try {
    json result;
    if (s->parsed()) result = cmd_synth(synth);
    else if (g->parsed()) result = cmd_augment(aug);
    else if (dcmd->parsed()) result = cmd_detect(det);
    else if (e->parsed()) result = cmd_eval(ev);
    else result = cmd_render(rend);
    emit(result, globals, out);
    return kSuccess;
  } catch (const Error& ex) {
    err << "mvaug: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "mvaug: " << ex.what() << "\n";
    return kDataError;
  }
}

}  // namespace mvaug::cli
