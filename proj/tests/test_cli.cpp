#include <doctest.h>

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "mvaug/cli.hpp"
#include "mvaug/io.hpp"

using namespace mvaug;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct Workspace {
  fs::path root;
  Workspace() {
    static int counter = 0;
    root = fs::temp_directory_path() / ("mvaug_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root);
    fs::create_directories(root);
    io::write_file_atomic(root / "config.json",
                          R"({"seed": 5, "scene": {"n_frames": 3, "n_pedestrians": 12}})");
  }
  ~Workspace() { fs::remove_all(root); }
  std::string p(const std::string& rel) const { return (root / rel).string(); }
};

std::string slurp(const fs::path& p) { return io::read_file(p); }

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    out[rel] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("cli: usage errors and help") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"bogus"}).code == cli::kUsageError);
  CHECK(run({"--help"}).code == cli::kSuccess);
  CHECK(run({"synth", "--config", "/nonexistent.json", "--out", "/tmp/x"}).code == cli::kUsageError);
  Workspace ws;
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")}).code == 0);
  const Run bad = run({"augment", "--dataset", ws.p("syn/dataset.json"), "--view-aug", "swirl", "--out", ws.p("a")});
  CHECK(bad.code == cli::kUsageError);
  CHECK_FALSE(bad.err.empty());
}

TEST_CASE("cli: synth writes a dataset and is byte-reproducible") {
  Workspace ws;
  const auto t0 = std::chrono::steady_clock::now();
  const Run a = run({"--json", "synth", "--config", ws.p("config.json"), "--out", ws.p("a")});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(a.code == 0);
  CHECK(secs < 10.0);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j["seed"] == 5);
  CHECK(fs::exists(ws.root / "a" / "calibrations" / "cam_3.json"));
  CHECK(fs::exists(ws.root / "a" / "annotations.jsonl"));
  CHECK(fs::exists(ws.root / "a" / "ground_truth" / io::frame_file_name(2, ".mvgrid")));
  const io::DatasetDescriptor d = io::load_dataset(ws.root / "a" / "dataset.json");
  CHECK(d.views.size() == 4);
  CHECK(d.frames.size() == 3);

  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("b")}).code == 0);
  CHECK(tree(ws.root / "a") == tree(ws.root / "b"));
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("c"), "--seed", "6"}).code == 0);
  CHECK(slurp(ws.root / "a" / "annotations.jsonl") != slurp(ws.root / "c" / "annotations.jsonl"));
}

TEST_CASE("cli: synth into an unwritable location is a data error") {
  Workspace ws;
  io::write_file_atomic(ws.root / "file", "x");
  CHECK(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("file/sub")}).code == cli::kDataError);
}

TEST_CASE("cli: none/none augmentation is the identity") {
  Workspace ws;
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")}).code == 0);
  REQUIRE(run({"augment", "--dataset", ws.p("syn/dataset.json"), "--view-aug", "none", "--scene-aug", "none",
               "--out", ws.p("aug")})
              .code == 0);
  const io::DatasetDescriptor src = io::load_dataset(ws.root / "syn" / "dataset.json");
  const io::DatasetDescriptor dst = io::load_dataset(ws.root / "aug" / "dataset.json");
  for (std::int64_t f : src.frames) {
    const io::FrameInputs a = io::load_frame_inputs(src, f), b = io::load_frame_inputs(dst, f);
    for (std::size_t v = 0; v < a.images.size(); ++v) {
      CHECK(a.t_grids[v].matrix() == b.t_grids[v].matrix());
      for (std::size_t i = 0; i < a.images[v].data().size(); ++i)
        CHECK(std::abs(a.images[v].data()[i] - b.images[v].data()[i]) <= 0.5f / 255.0f + 1e-6f);
    }
  }
  CHECK(io::load_annotations(src.annotations).size() == io::load_annotations(dst.annotations).size());
}

TEST_CASE("cli: augment proportion sweep") {
  Workspace ws;
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")}).code == 0);
  for (const char* p : {"0", "1"}) {
    const Run r = run({"--json", "augment", "--dataset", ws.p("syn/dataset.json"), "--proportion", p, "--seed", "3",
                       "--out", ws.p(std::string("aug") + p)});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["view_draws"] == 12);
    CHECK(j["view_augmented"] == (p[0] == '0' ? 0 : 12));
    CHECK(j["scene_augmented"] == (p[0] == '0' ? 0 : 3));
  }
}

TEST_CASE("cli: detect and eval on perfect synthetic input") {
  Workspace ws;
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")}).code == 0);
  REQUIRE(run({"detect", "--dataset", ws.p("syn/dataset.json"), "--out", ws.p("det.jsonl")}).code == 0);
  REQUIRE(run({"detect", "--dataset", ws.p("syn/dataset.json"), "--out", ws.p("det2.jsonl")}).code == 0);
  CHECK(slurp(ws.root / "det.jsonl") == slurp(ws.root / "det2.jsonl"));

  const Run e = run({"--json", "eval", "--detections", ws.p("det.jsonl"), "--gt", ws.p("syn/annotations.jsonl"),
                     "--report", ws.p("report.json")});
  REQUIRE(e.code == 0);
  const auto j = nlohmann::json::parse(e.out);
  CHECK(j["moda"].get<double>() >= 0.9);
  CHECK(fs::exists(ws.root / "report.json"));

  // Self-evaluation of the ground truth.
  const auto anns = io::load_annotations(ws.root / "syn" / "annotations.jsonl");
  std::vector<io::DetectionRecord> recs;
  for (const auto& a : anns) recs.push_back({a.frame, {0, 0}, a.world, 1.0});
  io::save_detections(ws.root / "gt_dets.jsonl", recs);
  const Run self = run({"--json", "eval", "--detections", ws.p("gt_dets.jsonl"), "--gt", ws.p("syn/annotations.jsonl")});
  REQUIRE(self.code == 0);
  CHECK(nlohmann::json::parse(self.out)["moda"] == 1.0);

  // Doctored: drop one detection, add two far away.
  recs.erase(recs.begin());
  recs.push_back({0, {0, 0}, {-50, -50}, 1.0});
  recs.push_back({1, {0, 0}, {-60, -50}, 1.0});
  io::save_detections(ws.root / "doctored.jsonl", recs);
  const Run doc = run({"--json", "eval", "--detections", ws.p("doctored.jsonl"), "--gt", ws.p("syn/annotations.jsonl")});
  REQUIRE(doc.code == 0);
  const double n = static_cast<double>(anns.size());
  CHECK(nlohmann::json::parse(doc.out)["moda"].get<double>() == doctest::Approx(1.0 - 3.0 / n));

  recs.push_back({99, {0, 0}, {0, 0}, 1.0});
  io::save_detections(ws.root / "stray.jsonl", recs);
  CHECK(run({"eval", "--detections", ws.p("stray.jsonl"), "--gt", ws.p("syn/annotations.jsonl")}).code ==
        cli::kDataError);
  CHECK(run({"eval", "--detections", ws.p("missing.jsonl"), "--gt", ws.p("syn/annotations.jsonl")}).code ==
        cli::kDataError);
}

TEST_CASE("cli: detect on an all-zero frame gives no detections") {
  Workspace ws;
  io::write_file_atomic(ws.root / "empty.json", R"({"seed": 1, "scene": {"n_frames": 1, "n_pedestrians": 0}})");
  REQUIRE(run({"synth", "--config", ws.p("empty.json"), "--out", ws.p("syn")}).code == 0);
  REQUIRE(run({"detect", "--dataset", ws.p("syn/dataset.json"), "--out", ws.p("det.jsonl")}).code == 0);
  CHECK(slurp(ws.root / "det.jsonl").empty());
}

TEST_CASE("cli: render dimensions, markers and determinism") {
  Workspace ws;
  REQUIRE(run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")}).code == 0);
  const Run r = run({"--json", "render", "--dataset", ws.p("syn/dataset.json"), "--frame", "1", "--view", "2",
                     "--out", ws.p("a.png"), "--seed", "4"});
  REQUIRE(r.code == 0);
  const ImageBuffer img = io::load_png(ws.root / "a.png");
  CHECK(img.width() == 3 * 120);
  CHECK(img.height() == 68);
  CHECK(img.channels() == 3);
  CHECK(nlohmann::json::parse(r.out)["markers"].get<int>() > 0);
  REQUIRE(run({"render", "--dataset", ws.p("syn/dataset.json"), "--frame", "1", "--view", "2", "--out", ws.p("b.png"),
               "--seed", "4"})
              .code == 0);
  CHECK(slurp(ws.root / "a.png") == slurp(ws.root / "b.png"));

  // Each marker center sits within 1.5 cells of its pedestrian's cell.
  const io::DatasetDescriptor d = io::load_dataset(ws.root / "syn" / "dataset.json");
  const double sx = 119.0 / static_cast<double>(d.grid.cols - 1), sy = 67.0 / static_cast<double>(d.grid.rows - 1);
  for (const auto& a : io::load_annotations(d.annotations)) {
    if (a.frame != 1) continue;
    const Point2 cell = d.grid.ground_to_grid(a.world);
    if (!d.grid.contains(cell)) continue;
    const long xi = std::lround(cell.x * sx), yi = std::lround(cell.y * sy);
    if (xi < 0 || yi < 0 || xi >= 120 || yi >= 68) continue;
    const auto x = static_cast<std::size_t>(xi), y = static_cast<std::size_t>(yi);
    CHECK(img.at(y, 240 + x, 0) == 1.0f);
    CHECK(img.at(y, 240 + x, 1) == 0.0f);
    CHECK(std::hypot(static_cast<double>(x) / sx - cell.x, static_cast<double>(y) / sy - cell.y) <= 1.5);
  }

  CHECK(run({"render", "--dataset", ws.p("syn/dataset.json"), "--frame", "7", "--view", "0", "--out", ws.p("c.png")})
            .code == cli::kDataError);
  CHECK(run({"render", "--dataset", ws.p("syn/dataset.json"), "--frame", "0", "--view", "9", "--out", ws.p("c.png")})
            .code == cli::kDataError);
}

TEST_CASE("cli: key=value output without --json") {
  Workspace ws;
  const Run r = run({"synth", "--config", ws.p("config.json"), "--out", ws.p("syn")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed=5") != std::string::npos);
  CHECK(r.out.find("command=synth") != std::string::npos);
}
