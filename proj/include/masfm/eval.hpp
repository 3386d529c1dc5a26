#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"

namespace masfm {

struct CameraErrors {
  ImageId id;
  double rotation_deg = 0.0;        // angle between viewing directions
  double rotation_geodesic_deg = 0.0;  // full relative-rotation angle (secondary)
  double translation = 0.0;         // distance between centers, scene units
  double reprojection_pct_width = 0.0;
};

struct CompareOptions {
  bool align = false;
  // Point pairs (estimated frame, truth frame) for the similarity fit.
  // With align set and no pairs given, camera centers are used instead.
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> alignment_pairs;
};

struct CompareResult {
  std::vector<CameraErrors> per_camera;
  double mean_rotation_deg = 0.0;
  double mean_translation = 0.0;
  double mean_reprojection_pct_width = 0.0;
  std::optional<SimilarityTransform> alignment;
};

// Per-camera rotational / translational / reprojection error against the
// ground truth set. Ids must coincide. With align set, the estimated
// cameras are first mapped by the least-squares similarity fit.
CompareResult compare_cameras(const std::map<ImageId, Camera>& estimated,
                              const std::map<ImageId, Camera>& truth,
                              const std::vector<Eigen::Vector3d>& eval_points,
                              const CompareOptions& options = {});

std::string metrics_to_text(const CompareResult& result);
std::string metrics_to_json(const CompareResult& result);

}  // namespace masfm
