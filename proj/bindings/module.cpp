#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "masfm/bundle.hpp"
#include "masfm/camera.hpp"
#include "masfm/cli.hpp"
#include "masfm/error.hpp"
#include "masfm/eval.hpp"
#include "masfm/geometry.hpp"
#include "masfm/io.hpp"
#include "masfm/mesh.hpp"
#include "masfm/occlusion.hpp"
#include "masfm/pipeline.hpp"
#include "masfm/pnp.hpp"
#include "masfm/ransac.hpp"
#include "masfm/synth.hpp"

namespace py = pybind11;
using namespace masfm;

namespace {

SceneRig rig_from_name(const std::string& name) {
  if (name == "orbit") return SceneRig::Orbit;
  if (name == "timelapse") return SceneRig::TimeLapseCluster;
  if (name == "twocluster") return SceneRig::TwoCluster;
  throw Error(ErrorCode::InvalidSpec, "unknown rig: " + name);
}

BundleMode mode_from_name(const std::string& name) {
  if (name == "classic") return BundleMode::Classic;
  if (name == "hard") return BundleMode::HardConstrained;
  if (name == "soft") return BundleMode::SoftConstrained;
  throw Error(ErrorCode::UsageError, "unknown bundle mode: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "model-assisted structure-from-motion toolkit";

  py::register_exception<Error>(m, "MasfmError");

  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init<>())
      .def(py::init([](double focal_px, double k1, double k2, int width, int height) {
             return Intrinsics{focal_px, k1, k2, width, height};
           }),
           py::arg("focal_px"), py::arg("k1") = 0.0, py::arg("k2") = 0.0, py::arg("width") = 640,
           py::arg("height") = 480)
      .def_readwrite("focal_px", &Intrinsics::focal_px)
      .def_readwrite("k1", &Intrinsics::k1)
      .def_readwrite("k2", &Intrinsics::k2)
      .def_readwrite("width", &Intrinsics::width)
      .def_readwrite("height", &Intrinsics::height)
      .def("fov_deg", &Intrinsics::fov_deg)
      .def_static("focal_from_fov_deg", &Intrinsics::focal_from_fov_deg, py::arg("fov_deg"),
                  py::arg("width"));

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector4d& quaternion_wxyz, const Eigen::Vector3d& center) {
             Pose pose;
             pose.rotation = Eigen::Quaterniond(quaternion_wxyz(0), quaternion_wxyz(1),
                                                quaternion_wxyz(2), quaternion_wxyz(3));
             pose.rotation.normalize();
             pose.center = center;
             return pose;
           }),
           py::arg("quaternion_wxyz"), py::arg("center"))
      .def_property(
          "quaternion_wxyz",
          [](const Pose& pose) {
            return Eigen::Vector4d(pose.rotation.w(), pose.rotation.x(), pose.rotation.y(),
                                   pose.rotation.z());
          },
          [](Pose& pose, const Eigen::Vector4d& q) {
            pose.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized();
          })
      .def_readwrite("center", &Pose::center)
      .def("rotation_matrix", &Pose::rotation_matrix)
      .def("view_direction", &Pose::view_direction)
      .def("world_to_camera", &Pose::world_to_camera);

  py::class_<Camera>(m, "Camera")
      .def(py::init<>())
      .def(py::init([](const Intrinsics& intrinsics, const Pose& pose) {
             return Camera{intrinsics, pose};
           }),
           py::arg("intrinsics"), py::arg("pose"))
      .def_readwrite("intrinsics", &Camera::intrinsics)
      .def_readwrite("pose", &Camera::pose);

  py::class_<Ray>(m, "Ray")
      .def_readonly("origin", &Ray::origin)
      .def_readonly("direction", &Ray::direction)
      .def("at", &Ray::at);

  m.def("project", &project, py::arg("camera"), py::arg("point"));
  m.def("pixel_ray", &pixel_ray, py::arg("camera"), py::arg("pixel"));
  m.def("undistort_normalized", &undistort_normalized, py::arg("intrinsics"), py::arg("distorted"));
  m.def("distort_normalized", &distort_normalized, py::arg("intrinsics"), py::arg("undistorted"));

  m.def(
      "triangulate",
      [](const std::vector<std::pair<Camera, Eigen::Vector2d>>& observations, double min_angle_deg) {
        return triangulate(observations, min_angle_deg);
      },
      py::arg("observations"), py::arg("min_angle_deg") = 2.0);

  py::class_<FeatureMatch>(m, "FeatureMatch")
      .def(py::init([](const std::string& image_a, const std::string& image_b,
                       const Eigen::Vector2d& pixel_a, const Eigen::Vector2d& pixel_b) {
             return FeatureMatch{image_a, image_b, pixel_a, pixel_b};
           }),
           py::arg("image_a"), py::arg("image_b"), py::arg("pixel_a"), py::arg("pixel_b"))
      .def_readwrite("image_a", &FeatureMatch::image_a)
      .def_readwrite("image_b", &FeatureMatch::image_b)
      .def_readwrite("pixel_a", &FeatureMatch::pixel_a)
      .def_readwrite("pixel_b", &FeatureMatch::pixel_b);

  m.def("estimate_fundamental", &estimate_fundamental, py::arg("matches"),
        py::arg("hartley_normalize") = true);
  m.def("estimate_homography", &estimate_homography, py::arg("matches"),
        py::arg("hartley_normalize") = true);
  m.def("apply_homography", &apply_homography, py::arg("homography"), py::arg("pixel"));
  m.def("epipolar_residual", &epipolar_residual, py::arg("fundamental"), py::arg("pixel_a"),
        py::arg("pixel_b"));
  m.def("sampson_distance", &sampson_distance, py::arg("fundamental"), py::arg("pixel_a"),
        py::arg("pixel_b"));

  py::class_<SimilarityTransform>(m, "SimilarityTransform")
      .def_readonly("scale", &SimilarityTransform::scale)
      .def_readonly("rotation", &SimilarityTransform::rotation)
      .def_readonly("translation", &SimilarityTransform::translation)
      .def_readonly("residual_mse", &SimilarityTransform::residual_mse)
      .def("apply", py::overload_cast<const Eigen::Vector3d&>(&SimilarityTransform::apply,
                                                              py::const_));
  m.def("similarity_align", &similarity_align, py::arg("source"), py::arg("target"));

  py::class_<RansacConfig>(m, "RansacConfig")
      .def(py::init<>())
      .def_readwrite("max_iterations", &RansacConfig::max_iterations)
      .def_readwrite("inlier_threshold", &RansacConfig::inlier_threshold)
      .def_readwrite("confidence", &RansacConfig::confidence)
      .def_readwrite("seed", &RansacConfig::seed);

  m.def(
      "prune_matches_fundamental",
      [](const std::vector<FeatureMatch>& matches, const RansacConfig& config) {
        const auto result = prune_matches_fundamental(matches, config);
        return py::make_tuple(result.inlier_indices, result.fundamental);
      },
      py::arg("matches"), py::arg("config"));
  m.def(
      "homography_gate",
      [](const std::vector<FeatureMatch>& matches, const RansacConfig& config, double gate_fraction) {
        const auto result = homography_gate(matches, config, gate_fraction);
        return py::make_tuple(result.passes, result.homography, result.inlier_fraction);
      },
      py::arg("matches"), py::arg("config"), py::arg("gate_fraction") = 0.8);

  py::class_<Correspondence2D3D>(m, "Correspondence2D3D")
      .def(py::init([](const Eigen::Vector2d& pixel, const Eigen::Vector3d& point) {
             return Correspondence2D3D{pixel, point, std::nullopt};
           }),
           py::arg("pixel"), py::arg("point"))
      .def(py::init([](const Eigen::Vector2d& pixel, const Eigen::Vector3d& point,
                       const Eigen::Vector3d& line) {
             return Correspondence2D3D{pixel, point, EpipolarLine::from_homogeneous(line)};
           }),
           py::arg("pixel"), py::arg("point"), py::arg("epipolar_line"))
      .def_readwrite("pixel", &Correspondence2D3D::pixel)
      .def_readwrite("point", &Correspondence2D3D::point);

  m.def(
      "solve_pnp",
      [](const std::vector<Correspondence2D3D>& correspondences, const Intrinsics& intrinsics,
         const Pose& initial_pose) { return solve_pnp(correspondences, intrinsics, initial_pose).pose; },
      py::arg("correspondences"), py::arg("intrinsics"), py::arg("initial_pose"));
  m.def(
      "solve_pnp_constrained",
      [](const std::vector<Correspondence2D3D>& correspondences, const Intrinsics& intrinsics,
         const Pose& initial_pose) {
        return solve_pnp_constrained(correspondences, intrinsics, initial_pose).pose;
      },
      py::arg("correspondences"), py::arg("intrinsics"), py::arg("initial_pose"));
  m.def("estimate_pose_dlt", &estimate_pose_dlt, py::arg("correspondences"), py::arg("intrinsics"));

  py::class_<BundleObservation>(m, "BundleObservation")
      .def(py::init([](int camera, const Eigen::Vector2d& pixel) {
             return BundleObservation{camera, pixel};
           }),
           py::arg("camera"), py::arg("pixel"))
      .def_readwrite("camera", &BundleObservation::camera)
      .def_readwrite("pixel", &BundleObservation::pixel);

  py::class_<BundleTrack>(m, "BundleTrack")
      .def(py::init([](const Eigen::Vector3d& point, const std::vector<BundleObservation>& observations) {
             BundleTrack track;
             track.point = point;
             track.observations = observations;
             return track;
           }),
           py::arg("point"), py::arg("observations"))
      .def_readwrite("point", &BundleTrack::point)
      .def_readwrite("observations", &BundleTrack::observations);

  py::class_<BundleProblem>(m, "BundleProblem")
      .def(py::init<>())
      .def_readwrite("cameras", &BundleProblem::cameras)
      .def_readwrite("anchor_indices", &BundleProblem::anchor_indices)
      .def_readwrite("tracks", &BundleProblem::tracks)
      .def_readwrite("anchor_weight", &BundleProblem::anchor_weight)
      .def_property(
          "mode", [](const BundleProblem& problem) { return bundle_mode_name(problem.mode); },
          [](BundleProblem& problem, const std::string& name) { problem.mode = mode_from_name(name); });

  m.def(
      "bundle_adjust",
      [](const BundleProblem& problem) {
        const BundleResult result = bundle_adjust(problem);
        py::dict report;
        report["initial_cost"] = result.report.initial_cost;
        report["final_cost"] = result.report.final_cost;
        report["iterations"] = result.report.iterations;
        report["termination"] = termination_name(result.report.termination);
        return py::make_tuple(result.cameras, result.points, report, result.warnings);
      },
      py::arg("problem"));

  m.def(
      "compare_cameras",
      [](const std::map<ImageId, Camera>& estimated, const std::map<ImageId, Camera>& truth,
         const std::vector<Eigen::Vector3d>& eval_points, bool align) {
        CompareOptions options;
        options.align = align;
        const CompareResult result = compare_cameras(estimated, truth, eval_points, options);
        py::dict out;
        py::dict cameras;
        for (const auto& e : result.per_camera) {
          py::dict entry;
          entry["rotation_deg"] = e.rotation_deg;
          entry["rotation_geodesic_deg"] = e.rotation_geodesic_deg;
          entry["translation"] = e.translation;
          entry["reprojection_pct_width"] = e.reprojection_pct_width;
          cameras[e.id.c_str()] = entry;
        }
        out["cameras"] = cameras;
        out["mean_rotation_deg"] = result.mean_rotation_deg;
        out["mean_translation"] = result.mean_translation;
        out["mean_reprojection_pct_width"] = result.mean_reprojection_pct_width;
        return out;
      },
      py::arg("estimated"), py::arg("truth"), py::arg("eval_points"), py::arg("align") = false);

  m.def("load_cameras_json", &load_cameras_json, py::arg("path"));
  m.def("save_cameras_json", &save_cameras_json, py::arg("cameras"), py::arg("path"));

  m.def(
      "generate_scene",
      [](const std::string& rig, int cameras, int points, double noise_px, double outlier_fraction,
         std::uint64_t seed, const std::string& out_dir) {
        SceneSpec spec;
        spec.rig = rig_from_name(rig);
        spec.camera_count = cameras;
        spec.point_count = points;
        spec.noise_px = noise_px;
        spec.outlier_fraction = outlier_fraction;
        spec.seed = seed;
        const SyntheticScene scene = generate_scene(spec);
        if (!out_dir.empty()) write_scene(scene, out_dir);
        py::dict out;
        out["image_ids"] = scene.image_ids;
        out["cameras"] = scene.cameras;
        out["track_count"] = scene.tracks.size();
        out["match_count"] = scene.matches.size();
        return out;
      },
      py::arg("rig"), py::arg("cameras") = 10, py::arg("points") = 300, py::arg("noise_px") = 0.0,
      py::arg("outlier_fraction") = 0.0, py::arg("seed") = 0, py::arg("out_dir") = "");

  m.def(
      "intersect_ray_mesh",
      [](const std::string& obj_path, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction)
          -> py::object {
        const TriangleMesh mesh = load_obj(obj_path);
        const auto hit = intersect_ray_mesh(mesh, {origin, direction.normalized()});
        if (!hit) return py::none();
        py::dict out;
        out["point"] = hit->point;
        out["triangle"] = hit->triangle;
        out["distance"] = hit->distance;
        return out;
      },
      py::arg("obj_path"), py::arg("origin"), py::arg("direction"));

  m.def("run_command", &run_command, py::arg("args"),
        "Run a CLI command (synth/register/ba/eval/occlude-*); returns the exit status.");

  m.attr("__version__") = "0.1.0";
}
