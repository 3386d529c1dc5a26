#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"
#include "masfm/mesh.hpp"

namespace masfm {

enum class SceneRig { Orbit, TimeLapseCluster, TwoCluster };

const char* scene_rig_name(SceneRig rig);

struct SceneSpec {
  int camera_count = 10;
  int point_count = 300;
  SceneRig rig = SceneRig::Orbit;
  double noise_px = 0.0;
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;
  int image_width = 640;
  int image_height = 480;
};

struct SceneObservation {
  int camera = 0;
  Eigen::Vector2d pixel;        // exact projection
  Eigen::Vector2d noisy_pixel;  // after Gaussian perturbation
};

struct SceneTrack {
  Eigen::Vector3d point;
  std::vector<SceneObservation> observations;
};

struct SceneAnnotation {
  Eigen::Vector2d pixel;  // exact projection in this camera
  Eigen::Vector3d point;  // mesh point
};

// Deterministic synthetic scene: a building-like mesh, ground-truth
// cameras, surface points with exact observations, pairwise matches (with
// noise and planted outliers), anchor annotations, and per-image
// annotations for the correspondence provider.
struct SyntheticScene {
  SceneSpec spec;
  TriangleMesh mesh;
  std::vector<std::string> image_ids;
  std::vector<Camera> cameras;  // ground truth
  std::vector<SceneTrack> tracks;
  std::vector<FeatureMatch> matches;  // noisy, with outliers
  std::vector<int> anchor_cameras;    // cameras that get an anchor file
  // Exact 2D-3D annotations for every camera that sees the anchor points.
  std::map<int, std::vector<SceneAnnotation>> annotations;
  std::vector<Eigen::Vector3d> eval_points;  // stratified reprojection probes

  Pose perturbed_pose(int camera, double angle_deg, double center_offset,
                      std::uint64_t salt) const;
};

// Box building with recessed window panels, centered near the origin.
TriangleMesh make_building_mesh();

SyntheticScene generate_scene(const SceneSpec& spec);

// Writes the scene as the directory layout the register command consumes:
// images.txt, matches.txt, mesh.obj, anchors/, provider/, truth/.
void write_scene(const SyntheticScene& scene, const std::string& directory);

}  // namespace masfm
