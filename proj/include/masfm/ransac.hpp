#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"

namespace masfm {

struct RansacConfig {
  int max_iterations = 2000;
  double inlier_threshold = 1.0;  // pixels
  double confidence = 0.999;      // >= 1 disables early termination
  std::uint64_t seed = 0;
};

struct FundamentalPruneResult {
  std::vector<FeatureMatch> inliers;
  std::vector<int> inlier_indices;
  Eigen::Matrix3d fundamental;
  int trials_used = 0;
};

// Consensus fundamental matrix over Sampson distance; the returned set is
// re-selected under the final refit so inlier/outlier status is always
// consistent with the reported model.
FundamentalPruneResult prune_matches_fundamental(const std::vector<FeatureMatch>& matches,
                                                 const RansacConfig& config);

struct HomographyGateResult {
  bool passes = false;
  std::optional<Eigen::Matrix3d> homography;
  double inlier_fraction = 0.0;
  int trials_used = 0;
};

// RANSAC homography with symmetric transfer error; passes when at least
// gate_fraction (default 0.8) of the matches are inliers.
HomographyGateResult homography_gate(const std::vector<FeatureMatch>& matches,
                                     const RansacConfig& config, double gate_fraction = 0.8);

struct PnpRansacResult {
  Pose pose;
  std::vector<int> inlier_indices;
  int trials_used = 0;
};

struct PixelPointPair {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
};

// Pose consensus over reprojection error with 4-point samples refined by
// solve_pnp. A non-positive inlier_threshold in the config selects the
// default of 1% of the image width.
PnpRansacResult pnp_ransac(const std::vector<PixelPointPair>& correspondences,
                           const Camera& camera_init, const RansacConfig& config);

}  // namespace masfm
