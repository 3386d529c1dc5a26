#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"
#include "masfm/lm.hpp"

namespace masfm {

// One user- or track-supplied pixel <-> 3D point pair, optionally carrying
// the epipolar line induced by the anchor view.
struct Correspondence2D3D {
  Eigen::Vector2d pixel;
  Eigen::Vector3d point;
  std::optional<EpipolarLine> epipolar_line;
};

struct PnpOptions {
  LmOptions lm;
  // Pseudo-Huber scale (pixels) for the constrained objective.
  double robust_delta_px = 1.0;
  double reprojection_weight = 1.0;
  double line_weight = 1.0;
};

struct PnpResult {
  Pose pose;
  SolveReport report;
};

// Pose minimizing the squared reprojection error over the six extrinsic
// parameters; intrinsics stay fixed.
PnpResult solve_pnp(const std::vector<Correspondence2D3D>& correspondences,
                    const Intrinsics& intrinsics, const Pose& initial_pose,
                    const PnpOptions& options = {});

// Pose jointly minimizing reprojection distance and point-to-line distance
// to the epipolar lines, both smoothed by a pseudo-Huber residual so the
// objective keeps the intended unsquared-norm robustness.
PnpResult solve_pnp_constrained(const std::vector<Correspondence2D3D>& correspondences,
                                const Intrinsics& intrinsics, const Pose& initial_pose,
                                const PnpOptions& options = {});

// Direct linear transform pose estimate from >= 6 non-coplanar
// correspondences; used to initialize PnP when no pose prior exists.
Pose estimate_pose_dlt(const std::vector<Correspondence2D3D>& correspondences,
                       const Intrinsics& intrinsics);

// The residual problem behind solve_pnp / solve_pnp_constrained, exposed
// for gradient verification. The returned problem references the
// correspondence list and intrinsics; both must outlive it.
std::unique_ptr<ResidualProblem> make_pnp_problem(
    const std::vector<Correspondence2D3D>& correspondences, const Intrinsics& intrinsics,
    bool constrained, const PnpOptions& options = {});

// Pose chart shared by the PnP problems: [qw qx qy qz cx cy cz].
Eigen::VectorXd pack_pose_parameters(const Pose& pose);
Pose unpack_pose_parameters(const Eigen::VectorXd& parameters);

// True when the 3D points span less than the given thickness relative to
// their extent (planarity report for anchor registration warnings).
bool points_coplanar(const std::vector<Correspondence2D3D>& correspondences,
                     double relative_tolerance = 1e-6);

}  // namespace masfm
