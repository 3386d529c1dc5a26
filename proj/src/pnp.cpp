#include "masfm/pnp.hpp"

#include <cmath>

#include "masfm/error.hpp"

namespace masfm {

Eigen::VectorXd pack_pose_parameters(const Pose& pose) {
  Eigen::VectorXd x(7);
  x << pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z(),
       pose.center.x(), pose.center.y(), pose.center.z();
  return x;
}

Pose unpack_pose_parameters(const Eigen::VectorXd& x) {
  Pose pose;
  pose.rotation = Eigen::Quaterniond(x(0), x(1), x(2), x(3));
  pose.rotation.normalize();
  pose.center = x.segment<3>(4);
  return pose;
}

namespace {

// Shared pose chart: ambient [qw qx qy qz cx cy cz], tangent
// [axis-angle increment (3), center increment (3)].

// Pseudo-Huber residual s(r) with s^2 equal to the pseudo-Huber loss of r,
// plus d s / d r. Linear near zero (slope 1/sqrt(2)), sqrt-like for large r.
struct RobustScalar {
  double value;
  double d_value;  // derivative with respect to r
};

RobustScalar robust_residual(double r, double delta) {
  const double a = r / delta;
  const double root = std::sqrt(1.0 + a * a);
  const double loss = delta * delta * (root - 1.0);
  const double s = std::sqrt(std::max(loss, 0.0));
  RobustScalar out{s, 0.0};
  if (s < 1e-12) {
    out.d_value = (r >= 0.0 ? 1.0 : -1.0) / std::sqrt(2.0);
  } else {
    out.d_value = r / (2.0 * s * root);
  }
  return out;
}

class PnpProblem : public ResidualProblem {
 public:
  PnpProblem(const std::vector<Correspondence2D3D>& correspondences, const Intrinsics& intrinsics,
             bool constrained, const PnpOptions& options)
      : correspondences_(correspondences),
        intrinsics_(intrinsics),
        constrained_(constrained),
        options_(options) {}

  int parameter_count() const override { return 7; }
  int tangent_count() const override { return 6; }
  int residual_count() const override {
    return static_cast<int>(correspondences_.size()) * 2;
  }

  Eigen::VectorXd plus(const Eigen::VectorXd& params, const Eigen::VectorXd& delta) const override {
    Pose pose = unpack_pose_parameters(params);
    pose.rotation = rotation_increment(delta.head<3>()) * pose.rotation;
    pose.rotation.normalize();
    pose.center += delta.tail<3>();
    return pack_pose_parameters(pose);
  }

  bool evaluate(const Eigen::VectorXd& params, Eigen::VectorXd& residuals) const override {
    return evaluate_impl(params, residuals, nullptr);
  }

  bool jacobian(const Eigen::VectorXd& params, Eigen::MatrixXd& jac) const override {
    Eigen::VectorXd residuals(residual_count());
    jac.resize(residual_count(), 6);
    return evaluate_impl(params, residuals, &jac);
  }

 private:
  bool evaluate_impl(const Eigen::VectorXd& params, Eigen::VectorXd& residuals,
                     Eigen::MatrixXd* jac) const {
    const Camera camera{intrinsics_, unpack_pose_parameters(params)};
    for (std::size_t i = 0; i < correspondences_.size(); ++i) {
      const auto& corr = correspondences_[i];
      ProjectionExpansion expansion;
      try {
        expansion = project_with_jacobians(camera, corr.point);
      } catch (const Error&) {
        return false;
      }
      const Eigen::Vector2d diff = expansion.pixel - corr.pixel;

      if (!constrained_) {
        residuals.segment<2>(2 * i) = options_.reprojection_weight * diff;
        if (jac) jac->middleRows<2>(2 * i) = options_.reprojection_weight * expansion.d_pose;
        continue;
      }

      // Row 0: pseudo-Huber of the reprojection distance.
      const double reproj = diff.norm();
      const RobustScalar s_reproj = robust_residual(reproj, options_.robust_delta_px);
      residuals(2 * i) = options_.reprojection_weight * s_reproj.value;
      if (jac) {
        if (reproj < 1e-12) {
          jac->row(2 * i).setZero();
        } else {
          jac->row(2 * i) = options_.reprojection_weight * s_reproj.d_value *
                            (diff.transpose() / reproj) * expansion.d_pose;
        }
      }

      // Row 1: pseudo-Huber of the signed point-to-line distance.
      const EpipolarLine& line = *corr.epipolar_line;
      const double signed_dist = line.signed_distance_to(expansion.pixel);
      const RobustScalar s_line = robust_residual(signed_dist, options_.robust_delta_px);
      residuals(2 * i + 1) = options_.line_weight * s_line.value;
      if (jac) {
        if (std::abs(signed_dist) < 1e-12) {
          jac->row(2 * i + 1).setZero();
        } else {
          jac->row(2 * i + 1) = options_.line_weight * s_line.d_value *
                                (line.coefficients.head<2>().transpose()) * expansion.d_pose;
        }
      }
    }
    return true;
  }

  const std::vector<Correspondence2D3D>& correspondences_;
  const Intrinsics& intrinsics_;
  bool constrained_;
  PnpOptions options_;
};

PnpResult solve_pnp_impl(const std::vector<Correspondence2D3D>& correspondences,
                         const Intrinsics& intrinsics, const Pose& initial_pose, bool constrained,
                         const PnpOptions& options) {
  if (correspondences.size() < 4) {
    throw Error(ErrorCode::TooFewCorrespondences, "need at least 4 correspondences");
  }
  if (constrained) {
    for (const auto& corr : correspondences) {
      if (!corr.epipolar_line) {
        throw Error(ErrorCode::MissingEpipolarLine, "constrained PnP requires a line per correspondence");
      }
    }
  }

  PnpProblem problem(correspondences, intrinsics, constrained, options);
  const Eigen::VectorXd initial = pack_pose_parameters(initial_pose);
  Eigen::VectorXd residuals(problem.residual_count());
  if (!problem.evaluate(initial, residuals)) {
    throw Error(ErrorCode::DivergedBehindCamera, "points behind camera at the initial pose");
  }

  LmResult lm = lm_minimize(problem, initial, options.lm);
  return {unpack_pose_parameters(lm.solution), std::move(lm.report)};
}

}  // namespace

PnpResult solve_pnp(const std::vector<Correspondence2D3D>& correspondences,
                    const Intrinsics& intrinsics, const Pose& initial_pose,
                    const PnpOptions& options) {
  return solve_pnp_impl(correspondences, intrinsics, initial_pose, false, options);
}

PnpResult solve_pnp_constrained(const std::vector<Correspondence2D3D>& correspondences,
                                const Intrinsics& intrinsics, const Pose& initial_pose,
                                const PnpOptions& options) {
  return solve_pnp_impl(correspondences, intrinsics, initial_pose, true, options);
}

std::unique_ptr<ResidualProblem> make_pnp_problem(
    const std::vector<Correspondence2D3D>& correspondences, const Intrinsics& intrinsics,
    bool constrained, const PnpOptions& options) {
  return std::make_unique<PnpProblem>(correspondences, intrinsics, constrained, options);
}

Pose estimate_pose_dlt(const std::vector<Correspondence2D3D>& correspondences,
                       const Intrinsics& intrinsics) {
  if (correspondences.size() < 6) {
    throw Error(ErrorCode::TooFewCorrespondences, "DLT needs at least 6 correspondences");
  }

  // Rows of the 2n x 12 system for P = [M | p4] on normalized pixels.
  Eigen::MatrixXd design(2 * correspondences.size(), 12);
  const Eigen::Vector2d pp = intrinsics.principal_point();
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    const Eigen::Vector2d n = (correspondences[i].pixel - pp) / intrinsics.focal_px;
    const Eigen::Vector4d xh = correspondences[i].point.homogeneous();
    design.row(2 * i) << xh.transpose(), Eigen::RowVector4d::Zero(), -n.x() * xh.transpose();
    design.row(2 * i + 1) << Eigen::RowVector4d::Zero(), xh.transpose(), -n.y() * xh.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(10) < 1e-12 * std::max(sv(0), 1e-300)) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT design matrix rank deficient");
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << p(0), p(1), p(2), p(3),
          p(4), p(5), p(6), p(7),
          p(8), p(9), p(10), p(11);

  // Fix the sign so points sit in front of the camera.
  int positive = 0;
  for (const auto& corr : correspondences) {
    if ((proj.leftCols<3>() * corr.point + proj.col(3)).z() > 0.0) ++positive;
  }
  if (2 * positive < static_cast<int>(correspondences.size())) proj = -proj;

  // Project M onto the nearest scaled rotation.
  Eigen::JacobiSVD<Eigen::Matrix3d> m_svd(proj.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d rot = m_svd.matrixU() * m_svd.matrixV().transpose();
  if (rot.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    rot = m_svd.matrixU() * flip * m_svd.matrixV().transpose();
  }
  const double scale = m_svd.singularValues().mean();
  if (scale < 1e-300) {
    throw Error(ErrorCode::DegenerateConfiguration, "degenerate DLT projection");
  }
  const Eigen::Vector3d translation = proj.col(3) / scale;

  Pose pose;
  pose.rotation = Eigen::Quaterniond(rot);
  pose.rotation.normalize();
  pose.center = -(rot.transpose() * translation);
  return pose;
}

bool points_coplanar(const std::vector<Correspondence2D3D>& correspondences,
                     double relative_tolerance) {
  if (correspondences.size() < 4) return true;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& corr : correspondences) centroid += corr.point;
  centroid /= static_cast<double>(correspondences.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& corr : correspondences) {
    const Eigen::Vector3d d = corr.point - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const double largest = eig.eigenvalues()(2);
  if (largest < 1e-24) return true;
  return eig.eigenvalues()(0) < relative_tolerance * largest;
}

}  // namespace masfm
