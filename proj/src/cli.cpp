#include "masfm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "masfm/bundle.hpp"
#include "masfm/error.hpp"
#include "masfm/eval.hpp"
#include "masfm/io.hpp"
#include "masfm/occlusion.hpp"
#include "masfm/pipeline.hpp"
#include "masfm/synth.hpp"

namespace masfm {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNeedsAnnotation = 3;
constexpr int kExitNumerical = 4;

bool g_quiet = false;

// Status chatter; machine-readable results are always written regardless.
std::ostream& status() {
  static std::ostream null_stream(nullptr);
  return g_quiet ? null_stream : std::cout;
}

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::UsageError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidSpec:
      return kExitUsage;
    case ErrorCode::ProviderDeclined:
      return kExitNeedsAnnotation;
    default:
      return kExitNumerical;
  }
}

struct CloudPoint {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
};

std::vector<OrientedPoint> load_cloud(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorCode::IoError, "cannot open cloud file " + path);
  std::vector<OrientedPoint> cloud;
  std::string line;
  while (std::getline(file, line)) {
    bool blank = true;
    for (char c : line) {
      if (c == '#') break;
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    std::istringstream stream(line);
    OrientedPoint p;
    if (!(stream >> p.point.x() >> p.point.y() >> p.point.z() >> p.normal.x() >> p.normal.y() >>
          p.normal.z())) {
      throw Error(ErrorCode::IoError, "malformed cloud line: " + line);
    }
    p.normal.normalize();
    cloud.push_back(p);
  }
  return cloud;
}

int command_synth(const SceneSpec& spec, const std::string& out_dir) {
  const SyntheticScene scene = generate_scene(spec);
  write_scene(scene, out_dir);
  status() << "scene " << scene_rig_name(spec.rig) << " cameras=" << scene.cameras.size()
            << " tracks=" << scene.tracks.size() << " matches=" << scene.matches.size()
            << " -> " << out_dir << "\n";
  return kExitOk;
}

struct RegisterArgs {
  std::string images, matches, mesh, anchors_dir, provider_dir, out_dir;
  std::string mode = "hard";
  std::uint64_t seed = 0;
  double fov_deg = 50.0;
  PipelineOptions tuning;  // threshold and RANSAC knobs
};

int command_register(const RegisterArgs& args) {
  PipelineInputs inputs;
  inputs.images = load_image_list(args.images);
  inputs.matches = load_matches(args.matches);
  inputs.mesh = load_obj(args.mesh);

  if (!fs::is_directory(args.anchors_dir)) {
    throw Error(ErrorCode::IoError, "anchor directory not found: " + args.anchors_dir);
  }
  std::vector<std::string> anchor_paths;
  for (const auto& entry : fs::directory_iterator(args.anchors_dir)) {
    if (entry.is_regular_file()) anchor_paths.push_back(entry.path().string());
  }
  std::sort(anchor_paths.begin(), anchor_paths.end());
  for (const auto& path : anchor_paths) {
    inputs.anchors.push_back(load_anchor_file(path));
  }

  PipelineOptions options = args.tuning;
  options.seed = args.seed;
  options.default_fov_deg = args.fov_deg;
  if (args.mode == "hard") {
    options.bundle_mode = BundleMode::HardConstrained;
  } else if (args.mode == "soft") {
    options.bundle_mode = BundleMode::SoftConstrained;
  } else if (args.mode == "classic") {
    options.bundle_mode = BundleMode::Classic;
  } else {
    throw Error(ErrorCode::UsageError, "unknown bundle mode: " + args.mode);
  }

  NullProvider null_provider;
  DirectoryProvider directory_provider(args.provider_dir);
  const CorrespondenceProvider& provider =
      args.provider_dir.empty() ? static_cast<const CorrespondenceProvider&>(null_provider)
                                : directory_provider;

  const RegistrationState state = run_pipeline(inputs, provider, options);

  fs::create_directories(args.out_dir);
  save_cameras_json(state.registered, args.out_dir + "/cameras.json");

  std::vector<PointRecord> points;
  for (std::size_t t = 0; t < state.track_graph.size(); ++t) {
    const Track& track = state.track_graph[t];
    if (!track.point) continue;
    points.push_back({static_cast<int>(t), *track.point,
                      static_cast<int>(track.observations.size())});
  }
  save_points(points, args.out_dir + "/points.txt");

  std::ostringstream events;
  for (const auto& line : state.event_log) events << line << "\n";
  write_text_file(args.out_dir + "/events.log", events.str());

  if (state.pending_annotation) {
    std::cerr << "annotation required for image " << *state.pending_annotation << "\n";
    return kExitNeedsAnnotation;
  }
  status() << "registered " << state.registered.size() << " images -> " << args.out_dir << "\n";
  return kExitOk;
}

int command_ba(const std::string& problem_path, const std::string& mode_override,
               const std::string& out_dir) {
  NamedBundleProblem named = load_bundle_problem_json(problem_path);
  if (!mode_override.empty()) {
    if (mode_override == "hard") {
      named.problem.mode = BundleMode::HardConstrained;
    } else if (mode_override == "soft") {
      named.problem.mode = BundleMode::SoftConstrained;
    } else if (mode_override == "classic") {
      named.problem.mode = BundleMode::Classic;
    } else {
      throw Error(ErrorCode::UsageError, "unknown bundle mode: " + mode_override);
    }
  }

  const BundleResult result = bundle_adjust(named.problem);

  fs::create_directories(out_dir);
  std::map<ImageId, Camera> cameras;
  for (std::size_t i = 0; i < result.cameras.size(); ++i) {
    cameras[named.image_ids[i]] = result.cameras[i];
  }
  save_cameras_json(cameras, out_dir + "/cameras.json");

  std::vector<PointRecord> points;
  for (std::size_t t = 0; t < result.points.size(); ++t) {
    points.push_back({static_cast<int>(t), result.points[t],
                      static_cast<int>(named.problem.tracks[t].observations.size())});
  }
  save_points(points, out_dir + "/points.txt");

  std::ostringstream report;
  report << "mode " << bundle_mode_name(named.problem.mode) << "\n"
         << "initial_cost " << format_double(result.report.initial_cost) << "\n"
         << "final_cost " << format_double(result.report.final_cost) << "\n"
         << "iterations " << result.report.iterations << "\n"
         << "termination " << termination_name(result.report.termination) << "\n";
  for (const auto& warning : result.warnings) report << "warning " << warning << "\n";
  write_text_file(out_dir + "/report.txt", report.str());

  status() << "bundle " << bundle_mode_name(named.problem.mode) << " cost "
            << result.report.initial_cost << " -> " << result.report.final_cost << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string estimated, truth, points, out_json, out_text;
  bool align = false;
};

int command_eval(const EvalArgs& args) {
  const auto estimated = load_cameras_json(args.estimated);
  const auto truth = load_cameras_json(args.truth);
  std::vector<Eigen::Vector3d> eval_points;
  if (!args.points.empty()) eval_points = load_point_list(args.points);

  CompareOptions options;
  options.align = args.align;
  const CompareResult result = compare_cameras(estimated, truth, eval_points, options);

  const std::string text = metrics_to_text(result);
  if (!args.out_text.empty()) {
    write_text_file(args.out_text, text);
  } else {
    std::cout << text;
  }
  if (!args.out_json.empty()) {
    write_text_file(args.out_json, metrics_to_json(result));
  }
  return kExitOk;
}

struct OccludeStaticArgs {
  std::string mesh, cameras, image, cloud, out;
};

int command_occlude_static(const OccludeStaticArgs& args) {
  const TriangleMesh mesh = load_obj(args.mesh);
  const auto cameras = load_cameras_json(args.cameras);
  const auto it = cameras.find(args.image);
  if (it == cameras.end()) {
    throw Error(ErrorCode::IoError, "image not found in cameras file: " + args.image);
  }
  const auto cloud = load_cloud(args.cloud);

  const StaticOcclusionResult result = classify_static_occlusions(cloud, mesh, it->second);

  std::ostringstream out;
  out << "# x y z occluding reason\n";
  for (const auto& verdict : result.verdicts) {
    out << format_double(verdict.point.x()) << " " << format_double(verdict.point.y()) << " "
        << format_double(verdict.point.z()) << " " << (verdict.occluding ? 1 : 0) << " "
        << occlusion_reason_name(verdict.reason) << "\n";
  }
  for (const auto& warning : result.warnings) out << "# warning " << warning << "\n";
  write_text_file(args.out, out.str());
  status() << "classified " << result.verdicts.size() << " points -> " << args.out << "\n";
  return kExitOk;
}

struct OccludeDynamicArgs {
  std::string reference;
  std::vector<std::string> images;
  std::string homographies;
  double threshold = 0.05;
  std::string out_background, out_mask;
};

int command_occlude_dynamic(const OccludeDynamicArgs& args) {
  const Image reference = load_ppm(args.reference);

  std::vector<Eigen::Matrix3d> homographies(args.images.size(), Eigen::Matrix3d::Identity());
  if (!args.homographies.empty()) {
    std::ifstream file(args.homographies);
    if (!file) throw Error(ErrorCode::IoError, "cannot open " + args.homographies);
    for (std::size_t i = 0; i < homographies.size(); ++i) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (!(file >> homographies[i](r, c))) {
            throw Error(ErrorCode::IoError, "homography file needs 9 values per image");
          }
        }
      }
    }
  }

  std::vector<AlignedImage> aligned;
  for (std::size_t i = 0; i < args.images.size(); ++i) {
    aligned.push_back({load_ppm(args.images[i]), homographies[i]});
  }

  const DynamicMaskResult result =
      compute_background_and_dynamic_mask(reference, aligned, args.threshold);
  if (!args.out_background.empty()) save_ppm(result.background, args.out_background);
  save_pgm(result.mask, args.out_mask);

  int masked = 0;
  for (unsigned char v : result.mask.data) masked += v ? 1 : 0;
  status() << "mask " << masked << "/" << result.mask.data.size() << " pixels -> "
            << args.out_mask << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"model-assisted structure-from-motion toolkit"};
  app.require_subcommand(1);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "stdout verbosity: quiet|info")->capture_default_str();

  // synth
  SceneSpec spec;
  std::string rig = "orbit";
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
  synth->add_option("--rig", rig, "orbit|timelapse|twocluster");
  synth->add_option("--cameras", spec.camera_count, "camera count");
  synth->add_option("--points", spec.point_count, "surface point count");
  synth->add_option("--noise", spec.noise_px, "observation noise (px)");
  synth->add_option("--outliers", spec.outlier_fraction, "fraction of matches replaced by outliers");
  synth->add_option("--seed", spec.seed, "random seed");
  synth->add_option("--width", spec.image_width, "image width");
  synth->add_option("--height", spec.image_height, "image height");
  synth->add_option("--out", synth_out, "output scene directory")->required();

  // register
  RegisterArgs register_args;
  auto* register_cmd = app.add_subcommand("register", "register images against the mesh");
  register_cmd->add_option("--images", register_args.images, "image manifest")->required();
  register_cmd->add_option("--matches", register_args.matches, "match file")->required();
  register_cmd->add_option("--mesh", register_args.mesh, "mesh OBJ")->required();
  register_cmd->add_option("--anchors", register_args.anchors_dir, "anchor file directory")->required();
  register_cmd->add_option("--provider", register_args.provider_dir,
                           "directory of per-image annotation files");
  register_cmd->add_option("--mode", register_args.mode, "hard|soft|classic");
  register_cmd->add_option("--seed", register_args.seed, "random seed");
  register_cmd->add_option("--fov-deg", register_args.fov_deg, "default field of view (deg)");
  register_cmd->add_option("--out", register_args.out_dir, "output directory")->required();
  register_cmd->add_option("--f-threshold", register_args.tuning.fundamental_threshold_factor,
                           "fundamental Sampson threshold as a fraction of image width");
  register_cmd->add_option("--h-threshold", register_args.tuning.homography_threshold_factor,
                           "homography transfer threshold as a fraction of image width");
  register_cmd->add_option("--pnp-threshold", register_args.tuning.pnp_threshold_factor,
                           "PnP reprojection threshold as a fraction of image width");
  register_cmd->add_option("--gate-fraction", register_args.tuning.homography_gate_fraction,
                           "inlier fraction required to pass the homography gate");
  register_cmd->add_option("--track-threshold", register_args.tuning.track_match_threshold,
                           "track matches needed for the PnP registration path");
  register_cmd->add_option("--min-angle-deg", register_args.tuning.min_triangulation_angle_deg,
                           "minimum pairwise ray angle for triangulation");
  register_cmd->add_option("--anchor-weight", register_args.tuning.anchor_weight,
                           "anchor weight for soft-constrained bundle adjustment");
  register_cmd->add_option("--ransac-iterations", register_args.tuning.ransac_max_iterations,
                           "RANSAC iteration cap");
  register_cmd->add_option("--ransac-confidence", register_args.tuning.ransac_confidence,
                           "RANSAC early-termination confidence");

  // ba
  std::string ba_problem, ba_mode, ba_out;
  auto* ba = app.add_subcommand("ba", "single bundle adjustment over a serialized problem");
  ba->add_option("--problem", ba_problem, "problem JSON")->required();
  ba->add_option("--mode", ba_mode, "override mode: hard|soft|classic");
  ba->add_option("--out", ba_out, "output directory")->required();

  // eval
  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "compare estimated cameras against ground truth");
  eval->add_option("--est", eval_args.estimated, "estimated cameras JSON")->required();
  eval->add_option("--truth", eval_args.truth, "ground-truth cameras JSON")->required();
  eval->add_option("--points", eval_args.points, "reprojection probe points");
  eval->add_flag("--align", eval_args.align, "similarity-align estimates to the truth frame first");
  eval->add_option("--out-json", eval_args.out_json, "metrics JSON path");
  eval->add_option("--out-text", eval_args.out_text, "metrics table path (default stdout)");

  // occlude-static
  OccludeStaticArgs static_args;
  auto* occlude_static = app.add_subcommand("occlude-static", "classify static occluders");
  occlude_static->add_option("--mesh", static_args.mesh, "mesh OBJ")->required();
  occlude_static->add_option("--cameras", static_args.cameras, "cameras JSON")->required();
  occlude_static->add_option("--image", static_args.image, "camera id")->required();
  occlude_static->add_option("--cloud", static_args.cloud, "point cloud (X Y Z nx ny nz)")->required();
  occlude_static->add_option("--out", static_args.out, "verdict file")->required();

  // occlude-dynamic
  OccludeDynamicArgs dynamic_args;
  auto* occlude_dynamic = app.add_subcommand("occlude-dynamic", "median background and change mask");
  occlude_dynamic->add_option("--reference", dynamic_args.reference, "reference PPM")->required();
  occlude_dynamic->add_option("--aligned", dynamic_args.images, "aligned PPM images")->required();
  occlude_dynamic->add_option("--homographies", dynamic_args.homographies,
                              "9 row-major values per image (default identity)");
  occlude_dynamic->add_option("--threshold", dynamic_args.threshold, "mask threshold");
  occlude_dynamic->add_option("--out-background", dynamic_args.out_background, "background PPM");
  occlude_dynamic->add_option("--out-mask", dynamic_args.out_mask, "mask PGM")->required();

  std::vector<const char*> argv;
  argv.push_back("masfm");
  for (const auto& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& error) {
    app.exit(error);
    return error.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  g_quiet = log_level == "quiet";

  try {
    if (synth->parsed()) {
      if (rig == "orbit") {
        spec.rig = SceneRig::Orbit;
      } else if (rig == "timelapse") {
        spec.rig = SceneRig::TimeLapseCluster;
      } else if (rig == "twocluster") {
        spec.rig = SceneRig::TwoCluster;
      } else {
        throw Error(ErrorCode::UsageError, "unknown rig: " + rig);
      }
      return command_synth(spec, synth_out);
    }
    if (register_cmd->parsed()) return command_register(register_args);
    if (ba->parsed()) return command_ba(ba_problem, ba_mode, ba_out);
    if (eval->parsed()) return command_eval(eval_args);
    if (occlude_static->parsed()) return command_occlude_static(static_args);
    if (occlude_dynamic->parsed()) return command_occlude_dynamic(dynamic_args);
    return kExitUsage;
  } catch (const Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace masfm
