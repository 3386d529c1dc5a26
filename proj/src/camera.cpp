#include "masfm/camera.hpp"

#include <cmath>

#include "masfm/error.hpp"

namespace masfm {

namespace {
constexpr int kUndistortMaxIterations = 50;
constexpr double kUndistortTolerance = 1e-12;
constexpr double kMinDepth = 1e-12;
}  // namespace

double Intrinsics::fov_deg() const {
  return 2.0 * std::atan2(0.5 * width, focal_px) * 180.0 / M_PI;
}

double Intrinsics::focal_from_fov_deg(double fov_deg, int width) {
  return 0.5 * width / std::tan(0.5 * fov_deg * M_PI / 180.0);
}

Eigen::Quaterniond rotation_increment(const Eigen::Vector3d& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * axis_angle.x(), 0.5 * axis_angle.y(), 0.5 * axis_angle.z());
    q.normalize();
    return q;
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis_angle / angle));
}

Eigen::Vector2d distort_normalized(const Intrinsics& intrinsics, const Eigen::Vector2d& undistorted) {
  const double r2 = undistorted.squaredNorm();
  const double factor = 1.0 + intrinsics.k1 * r2 + intrinsics.k2 * r2 * r2;
  return factor * undistorted;
}

Eigen::Vector2d undistort_normalized(const Intrinsics& intrinsics, const Eigen::Vector2d& distorted) {
  if (intrinsics.k1 == 0.0 && intrinsics.k2 == 0.0) return distorted;
  Eigen::Vector2d x = distorted;
  for (int i = 0; i < kUndistortMaxIterations; ++i) {
    const double r2 = x.squaredNorm();
    const double factor = 1.0 + intrinsics.k1 * r2 + intrinsics.k2 * r2 * r2;
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw Error(ErrorCode::DistortionNotInvertible, "distortion factor became non-positive");
    }
    const Eigen::Vector2d next = distorted / factor;
    const double step = (next - x).norm();
    x = next;
    if (step < kUndistortTolerance) return x;
  }
  throw Error(ErrorCode::DistortionNotInvertible,
              "fixed-point undistortion did not converge in 50 iterations");
}

Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point) {
  const Eigen::Vector3d x_cam = camera.pose.world_to_camera(point);
  if (x_cam.z() <= kMinDepth) {
    throw Error(ErrorCode::NonPositiveDepth, "point does not have positive depth");
  }
  const Eigen::Vector2d normalized(x_cam.x() / x_cam.z(), x_cam.y() / x_cam.z());
  const Eigen::Vector2d distorted = distort_normalized(camera.intrinsics, normalized);
  return camera.intrinsics.focal_px * distorted + camera.intrinsics.principal_point();
}

ProjectionExpansion project_with_jacobians(const Camera& camera, const Eigen::Vector3d& point) {
  const Intrinsics& intr = camera.intrinsics;
  const Eigen::Matrix3d rot = camera.pose.rotation_matrix();
  const Eigen::Vector3d x_cam = rot * (point - camera.pose.center);
  if (x_cam.z() <= kMinDepth) {
    throw Error(ErrorCode::NonPositiveDepth, "point does not have positive depth");
  }

  const double inv_z = 1.0 / x_cam.z();
  const Eigen::Vector2d n(x_cam.x() * inv_z, x_cam.y() * inv_z);
  const double r2 = n.squaredNorm();
  const double g = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  const Eigen::Vector2d m = g * n;

  ProjectionExpansion out;
  out.pixel = intr.focal_px * m + intr.principal_point();

  // d normalized / d x_cam
  Eigen::Matrix<double, 2, 3> dn_dx;
  dn_dx << inv_z, 0.0, -n.x() * inv_z,
           0.0, inv_z, -n.y() * inv_z;
  // d distorted / d normalized
  const double dg_dr2 = intr.k1 + 2.0 * intr.k2 * r2;
  const Eigen::Matrix2d dm_dn = g * Eigen::Matrix2d::Identity() + 2.0 * dg_dr2 * n * n.transpose();

  const Eigen::Matrix<double, 2, 3> dpix_dx = intr.focal_px * dm_dn * dn_dx;

  // x_cam = exp([delta]x) * R * (X - c)  =>  d x_cam / d delta = -[x_cam]x
  Eigen::Matrix3d x_cam_hat;
  x_cam_hat << 0.0, -x_cam.z(), x_cam.y(),
               x_cam.z(), 0.0, -x_cam.x(),
               -x_cam.y(), x_cam.x(), 0.0;

  out.d_point = dpix_dx * rot;
  out.d_pose.leftCols<3>() = -dpix_dx * x_cam_hat;
  out.d_pose.rightCols<3>() = -dpix_dx * rot;
  out.d_intrinsics.col(0) = m;
  out.d_intrinsics.col(1) = intr.focal_px * r2 * n;
  out.d_intrinsics.col(2) = intr.focal_px * r2 * r2 * n;
  return out;
}

Ray pixel_ray(const Camera& camera, const Eigen::Vector2d& pixel) {
  const Intrinsics& intr = camera.intrinsics;
  const Eigen::Vector2d distorted = (pixel - intr.principal_point()) / intr.focal_px;
  const Eigen::Vector2d n = undistort_normalized(intr, distorted);
  const Eigen::Vector3d dir_cam(n.x(), n.y(), 1.0);
  const Eigen::Vector3d dir_world = camera.pose.rotation.conjugate() * dir_cam;
  return {camera.pose.center, dir_world.normalized()};
}

RayExpansion pixel_ray_with_jacobians(const Camera& camera, const Eigen::Vector2d& pixel) {
  const Intrinsics& intr = camera.intrinsics;
  const Eigen::Vector2d distorted = (pixel - intr.principal_point()) / intr.focal_px;
  const Eigen::Vector2d n = undistort_normalized(intr, distorted);

  // Implicit differentiation of n * g(n) = distorted.
  const double r2 = n.squaredNorm();
  const double g = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  const double dg_dr2 = intr.k1 + 2.0 * intr.k2 * r2;
  const Eigen::Matrix2d forward = g * Eigen::Matrix2d::Identity() + 2.0 * dg_dr2 * n * n.transpose();
  const Eigen::Matrix2d forward_inv = forward.inverse();

  Eigen::Matrix<double, 2, 3> dn_dintr;
  dn_dintr.col(0) = forward_inv * (-distorted / intr.focal_px);  // d distorted/d f = -distorted/f
  dn_dintr.col(1) = forward_inv * (-r2 * n);
  dn_dintr.col(2) = forward_inv * (-r2 * r2 * n);

  const Eigen::Matrix3d rot_t = camera.pose.rotation.conjugate().toRotationMatrix();
  const Eigen::Vector3d w = rot_t * Eigen::Vector3d(n.x(), n.y(), 1.0);
  const double w_norm = w.norm();
  const Eigen::Vector3d d = w / w_norm;

  Eigen::Matrix<double, 3, 2> dw_dn = rot_t.leftCols<2>();
  const Eigen::Matrix3d dd_dw = (Eigen::Matrix3d::Identity() - d * d.transpose()) / w_norm;

  RayExpansion out;
  out.ray = {camera.pose.center, d};
  out.d_direction_d_intrinsics = dd_dw * dw_dn * dn_dintr;
  return out;
}

bool pixel_in_bounds(const Intrinsics& intrinsics, const Eigen::Vector2d& pixel, double margin) {
  return pixel.x() >= margin && pixel.x() <= intrinsics.width - margin &&
         pixel.y() >= margin && pixel.y() <= intrinsics.height - margin;
}

}  // namespace masfm
