#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/image.hpp"
#include "masfm/mesh.hpp"

namespace masfm {

struct OrientedPoint {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // unit
};

enum class OcclusionReason { DepthGap, NormalDisagreement, NoIntersection };

const char* occlusion_reason_name(OcclusionReason reason);

struct OcclusionVerdict {
  Eigen::Vector3d point;
  std::optional<Eigen::Vector3d> model_point;
  bool occluding = false;
  OcclusionReason reason = OcclusionReason::NoIntersection;
};

struct StaticOcclusionOptions {
  double depth_gap_m = 0.3;        // point closer to the camera than the mesh by more than this
  double normal_angle_deg = 30.0;  // or normals disagreeing by more than this
};

struct StaticOcclusionResult {
  std::vector<OcclusionVerdict> verdicts;
  std::vector<std::string> warnings;  // points behind the camera are skipped
};

// Classifies each cloud point as occluding the mesh in the given view:
// project the point, cast its pixel ray to the mesh, and flag the point
// when it sits more than depth_gap_m closer to the camera than the mesh
// hit or when its normal disagrees with the mesh normal beyond
// normal_angle_deg. Rays that miss the mesh yield non-occluding verdicts.
StaticOcclusionResult classify_static_occlusions(const std::vector<OrientedPoint>& cloud,
                                                 const TriangleMesh& mesh, const Camera& camera,
                                                 const StaticOcclusionOptions& options = {});

struct AlignedImage {
  Image image;
  Eigen::Matrix3d homography_to_reference = Eigen::Matrix3d::Identity();
};

struct DynamicMaskResult {
  Image background;
  Mask mask;
};

// Builds the per-pixel median background from the aligned images and masks
// reference pixels whose smoothed squared HSV difference from the
// background exceeds the threshold in any channel.
DynamicMaskResult compute_background_and_dynamic_mask(const Image& reference,
                                                      const std::vector<AlignedImage>& aligned,
                                                      double threshold = 0.05);

}  // namespace masfm
