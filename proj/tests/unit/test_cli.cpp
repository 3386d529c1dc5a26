#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "masfm/camera.hpp"
#include "masfm/cli.hpp"
#include "masfm/error.hpp"
#include "masfm/image.hpp"
#include "masfm/io.hpp"
#include "masfm/rng.hpp"

using namespace masfm;

namespace {

namespace fs = std::filesystem;

const std::string kWork = "masfm_test_tmp/cli";

std::string slurp(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  REQUIRE(file);
  return std::string(std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cli: unknown flags and subcommands exit 2") {
  CHECK(run_command({"--definitely-not-a-flag"}) == 2);
  CHECK(run_command({"synth", "--bogus"}) == 2);
  CHECK(run_command({}) == 2);
  CHECK(run_command({"register", "--images", "nope.txt", "--matches", "nope.txt", "--mesh",
                     "nope.obj", "--anchors", "nope", "--out", kWork + "/none"}) == 2);
}

TEST_CASE("cli: synth then register then eval, byte-identical on re-run") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const std::string scene = kWork + "/scene";

  REQUIRE(run_command({"synth", "--rig", "orbit", "--cameras", "6", "--points", "120", "--noise",
                       "0.3", "--outliers", "0.05", "--seed", "42", "--out", scene}) == 0);
  REQUIRE(fs::exists(scene + "/images.txt"));
  REQUIRE(fs::exists(scene + "/anchors/cam00.txt"));
  REQUIRE(fs::exists(scene + "/truth/cameras.json"));

  const auto register_args = [&](const std::string& out) {
    return std::vector<std::string>{
        "register", "--images", scene + "/images.txt", "--matches", scene + "/matches.txt",
        "--mesh", scene + "/mesh.obj", "--anchors", scene + "/anchors", "--provider",
        scene + "/provider", "--seed", "42", "--out", out};
  };
  REQUIRE(run_command(register_args(kWork + "/est1")) == 0);
  REQUIRE(run_command(register_args(kWork + "/est2")) == 0);
  for (const char* name : {"cameras.json", "points.txt", "events.log"}) {
    CHECK(slurp(kWork + "/est1/" + std::string(name)) ==
          slurp(kWork + "/est2/" + std::string(name)));
  }

  REQUIRE(run_command({"eval", "--est", kWork + "/est1/cameras.json", "--truth",
                       scene + "/truth/cameras.json", "--points", scene + "/truth/eval_points.txt",
                       "--out-json", kWork + "/metrics1.json", "--out-text",
                       kWork + "/metrics1.txt"}) == 0);
  REQUIRE(run_command({"eval", "--est", kWork + "/est1/cameras.json", "--truth",
                       scene + "/truth/cameras.json", "--points", scene + "/truth/eval_points.txt",
                       "--out-json", kWork + "/metrics2.json", "--out-text",
                       kWork + "/metrics2.txt"}) == 0);
  CHECK(slurp(kWork + "/metrics1.json") == slurp(kWork + "/metrics2.json"));
  CHECK(slurp(kWork + "/metrics1.txt") == slurp(kWork + "/metrics2.txt"));
  CHECK(slurp(kWork + "/metrics1.json").find("rotation_deg") != std::string::npos);
}

TEST_CASE("cli: register without a provider on a twocluster scene exits 3 naming the image") {
  fs::create_directories(kWork);
  const std::string scene = kWork + "/scene_tc";
  REQUIRE(run_command({"synth", "--rig", "twocluster", "--cameras", "6", "--points", "100",
                       "--seed", "9", "--out", scene}) == 0);
  const int code = run_command({"register", "--images", scene + "/images.txt", "--matches",
                                scene + "/matches.txt", "--mesh", scene + "/mesh.obj", "--anchors",
                                scene + "/anchors", "--seed", "9", "--out", kWork + "/est_tc"});
  CHECK(code == 3);
  // The pending image is reported in the event log.
  const std::string events = slurp(kWork + "/est_tc/events.log");
  CHECK(events.find("requires annotation") != std::string::npos);
}

TEST_CASE("cli: ba subcommand runs a serialized problem") {
  fs::create_directories(kWork);
  const std::string scene = kWork + "/scene_ba";
  REQUIRE(run_command({"synth", "--rig", "orbit", "--cameras", "4", "--points", "60", "--seed",
                       "21", "--out", scene}) == 0);

  // Build a problem JSON from the synthetic truth with perturbed points.
  const auto cameras = load_cameras_json(scene + "/truth/cameras.json");
  NamedBundleProblem named;
  for (const auto& [id, camera] : cameras) {
    named.image_ids.push_back(id);
    named.problem.cameras.push_back(camera);
  }
  named.problem.anchor_indices = {0};
  named.problem.mode = BundleMode::HardConstrained;

  const auto points = load_points(scene + "/truth/points.txt");
  masfm::Rng jitter(55);
  int used = 0;
  for (const auto& record : points) {
    if (used >= 40) break;
    BundleTrack track;
    track.point = record.point + 0.01 * Eigen::Vector3d(jitter.gaussian(), jitter.gaussian(),
                                                        jitter.gaussian());
    bool ok = true;
    for (std::size_t c = 0; c < named.problem.cameras.size(); ++c) {
      try {
        track.observations.push_back(
            {static_cast<int>(c), project(named.problem.cameras[c], record.point)});
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) continue;
    named.problem.tracks.push_back(track);
    ++used;
  }
  REQUIRE(used == 40);
  save_bundle_problem_json(named, kWork + "/problem.json");

  REQUIRE(run_command({"ba", "--problem", kWork + "/problem.json", "--out", kWork + "/ba_out"}) ==
          0);
  CHECK(fs::exists(kWork + "/ba_out/cameras.json"));
  CHECK(fs::exists(kWork + "/ba_out/points.txt"));
  const std::string report = slurp(kWork + "/ba_out/report.txt");
  CHECK(report.find("mode hard") != std::string::npos);

  // The exact observations drive the cost to zero and pull the jittered
  // points back near the truth (up to the scale slice the solve pins).
  std::istringstream report_stream(report);
  std::string key;
  double final_cost = 1e9;
  while (report_stream >> key) {
    if (key == "final_cost") report_stream >> final_cost;
  }
  CHECK(final_cost < 1e-10);

  const auto solved_points = load_points(kWork + "/ba_out/points.txt");
  double worst = 0.0;
  for (int i = 0; i < used; ++i) {
    double best = 1e9;
    for (const auto& record : points) {
      best = std::min(best, (solved_points[i].point - record.point).norm());
    }
    worst = std::max(worst, best);
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("cli: occlude-static and occlude-dynamic produce their artifacts") {
  fs::create_directories(kWork);
  const std::string scene = kWork + "/scene_occ";
  REQUIRE(run_command({"synth", "--rig", "orbit", "--cameras", "2", "--points", "20", "--seed",
                       "33", "--out", scene}) == 0);

  {
    // A point 40% of the way from the camera to the building center floats
    // well in front of the facade: a clean depth-gap occluder.
    const auto cameras = load_cameras_json(scene + "/truth/cameras.json");
    const Eigen::Vector3d center = cameras.at("cam00").pose.center;
    const Eigen::Vector3d target(0.0, 0.0, 4.0);
    const Eigen::Vector3d floating = center + 0.4 * (target - center);
    const Eigen::Vector3d normal = (center - floating).normalized();
    std::ofstream cloud(kWork + "/cloud.txt");
    cloud << floating.x() << " " << floating.y() << " " << floating.z() << " " << normal.x() << " "
          << normal.y() << " " << normal.z() << "\n";
  }
  REQUIRE(run_command({"occlude-static", "--mesh", scene + "/mesh.obj", "--cameras",
                       scene + "/truth/cameras.json", "--image", "cam00", "--cloud",
                       kWork + "/cloud.txt", "--out", kWork + "/verdicts.txt"}) == 0);
  const std::string verdicts = slurp(kWork + "/verdicts.txt");
  CHECK(verdicts.find("depth_gap") != std::string::npos);

  // Tiny synthetic PPMs for the dynamic path.
  Image base(16, 12, 0.4f);
  save_ppm(base, kWork + "/ref.ppm");
  save_ppm(base, kWork + "/t1.ppm");
  save_ppm(base, kWork + "/t2.ppm");
  REQUIRE(run_command({"occlude-dynamic", "--reference", kWork + "/ref.ppm", "--aligned",
                       kWork + "/t1.ppm", kWork + "/t2.ppm", "--out-mask", kWork + "/mask.pgm",
                       "--out-background", kWork + "/bg.ppm"}) == 0);
  CHECK(fs::exists(kWork + "/mask.pgm"));
  CHECK(fs::exists(kWork + "/bg.ppm"));
  const std::string mask = slurp(kWork + "/mask.pgm");
  CHECK(mask.rfind("P5", 0) == 0);
}
