#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/lm.hpp"

namespace masfm {

enum class BundleMode { Classic, HardConstrained, SoftConstrained };

const char* bundle_mode_name(BundleMode mode);

struct BundleObservation {
  int camera = 0;  // index into BundleProblem::cameras
  Eigen::Vector2d pixel;
};

struct BundleTrack {
  std::vector<BundleObservation> observations;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

// Joint refinement problem over cameras and points.
//
//   Classic          minimizes sum_i sum_u || project(P_i, X_u) - u ||^2
//                    with the first anchor pose (or camera 0 plus the
//                    0-1 baseline length when no anchor exists) pinned.
//   HardConstrained  re-parameterizes every anchor-seen point as
//                    X_u(t_u) = center_anchor + t_u * ray_anchor(u) and
//                    removes anchor poses from the parameters; anchor
//                    intrinsics stay free.
//   SoftConstrained  weights anchor observations by anchor_weight (the
//                    others by 1) and removes anchor poses.
//
// Focal length and both distortion coefficients stay free for every
// camera in every mode.
struct BundleProblem {
  std::vector<Camera> cameras;
  std::vector<int> anchor_indices;  // indices into cameras
  std::vector<BundleTrack> tracks;
  BundleMode mode = BundleMode::Classic;
  double anchor_weight = 100.0;
  std::vector<double> weights;  // optional per-camera override (soft mode)
};

struct BundleOptions {
  LmOptions lm;
};

struct BundleResult {
  std::vector<Camera> cameras;
  std::vector<Eigen::Vector3d> points;
  SolveReport report;
  std::vector<std::string> warnings;
  // Tracks still constrained to an anchor ray after the solve; pairs of
  // (track index, anchor camera index).
  std::vector<std::pair<int, int>> ray_constrained_tracks;
};

// Throws UnderConstrained when a camera has fewer than 6 observations,
// when a constrained mode has no anchor, or when classic mode lacks the
// cameras needed to fix the gauge.
BundleResult bundle_adjust(const BundleProblem& problem, const BundleOptions& options = {});

// The residual problem behind bundle_adjust, exposed for gradient
// verification. References the given BundleProblem, which must outlive it.
struct BundleExpansion {
  std::unique_ptr<ResidualProblem> residual_problem;
  Eigen::VectorXd initial_parameters;
  std::vector<std::string> warnings;
};
BundleExpansion make_bundle_residual_problem(const BundleProblem& problem);

}  // namespace masfm
