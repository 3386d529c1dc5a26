#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "masfm/bundle.hpp"
#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"
#include "masfm/pnp.hpp"

namespace masfm {

// One row of the image manifest (images.txt): id, size, optional focal
// metadata standing in for EXIF.
struct ImageInfo {
  ImageId id;
  int width = 0;
  int height = 0;
  std::optional<double> focal_px;
};

std::vector<ImageInfo> load_image_list(const std::string& path);
void save_image_list(const std::vector<ImageInfo>& images, const std::string& path);

// Match file: one `image_a image_b ua va ub vb` per line, '#' comments.
std::vector<FeatureMatch> load_matches(const std::string& path);
void save_matches(const std::vector<FeatureMatch>& matches, const std::string& path);

// Anchor correspondence file. Header:
//   image <image_id> init_quat w x y z init_center x y z fov_deg <f>
// followed by `u v X Y Z` lines.
struct AnchorFile {
  ImageId image_id;
  Pose initial_pose;
  double fov_deg = 50.0;
  std::vector<Correspondence2D3D> correspondences;
};

AnchorFile load_anchor_file(const std::string& path);
void save_anchor_file(const AnchorFile& anchor, const std::string& path);

// Plain `u v X Y Z` annotation lines (provider files).
std::vector<Correspondence2D3D> load_annotation_lines(const std::string& path);
void save_annotation_lines(const std::vector<Correspondence2D3D>& annotations,
                           const std::string& path);

// Camera serialization:
// {focal_px, k1, k2, width, height, quaternion:[w,x,y,z], center:[x,y,z]}
std::map<ImageId, Camera> load_cameras_json(const std::string& path);
void save_cameras_json(const std::map<ImageId, Camera>& cameras, const std::string& path);

// Point cloud file: `id X Y Z n_obs` per line.
struct PointRecord {
  int id = 0;
  Eigen::Vector3d point;
  int observation_count = 0;
};

std::vector<PointRecord> load_points(const std::string& path);
void save_points(const std::vector<PointRecord>& points, const std::string& path);

std::vector<Eigen::Vector3d> load_point_list(const std::string& path);
void save_point_list(const std::vector<Eigen::Vector3d>& points, const std::string& path);

// Serialized bundle problem for the `ba` subcommand.
struct NamedBundleProblem {
  std::vector<ImageId> image_ids;  // parallel to problem.cameras
  BundleProblem problem;
};

NamedBundleProblem load_bundle_problem_json(const std::string& path);
void save_bundle_problem_json(const NamedBundleProblem& named, const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);

// %.17g formatting helper shared by the text writers.
std::string format_double(double value);

}  // namespace masfm
