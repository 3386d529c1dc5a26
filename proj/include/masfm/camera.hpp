#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace masfm {

// Pinhole intrinsics with two even radial distortion coefficients.
// The principal point is pinned to the image center and pixels are
// square, so focal length, k1 and k2 are the only calibration unknowns.
struct Intrinsics {
  double focal_px = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Vector2d principal_point() const {
    return {0.5 * width, 0.5 * height};
  }
  double fov_deg() const;
  static double focal_from_fov_deg(double fov_deg, int width);
};

// World-to-camera map is x_cam = R * (X - center). The rotation is stored
// as a unit quaternion; solvers optimize a 3-parameter axis-angle
// increment applied on the left (world-frame perturbation).
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
  Eigen::Vector3d translation() const { return -(rotation * center); }
  // Camera viewing direction (+z axis) expressed in world coordinates.
  Eigen::Vector3d view_direction() const {
    return rotation.conjugate() * Eigen::Vector3d::UnitZ();
  }
  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& point) const {
    return rotation * (point - center);
  }
};

struct Camera {
  Intrinsics intrinsics;
  Pose pose;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length

  Eigen::Vector3d at(double t) const { return origin + t * direction; }
};

// Quaternion for a small world-frame rotation increment; exact exponential
// with a first-order branch near zero.
Eigen::Quaterniond rotation_increment(const Eigen::Vector3d& axis_angle);

// Forward radial distortion of normalized image coordinates.
Eigen::Vector2d distort_normalized(const Intrinsics& intrinsics, const Eigen::Vector2d& undistorted);

// Inverse of distort_normalized by fixed-point iteration (50 iterations,
// tolerance 1e-12). Throws DistortionNotInvertible when it fails to settle.
Eigen::Vector2d undistort_normalized(const Intrinsics& intrinsics, const Eigen::Vector2d& distorted);

// Projects a world point. Throws NonPositiveDepth when the point does not
// have strictly positive depth in the camera frame.
Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point);

// Projection plus the Jacobian blocks used by every solver in the library.
// d_pose columns are organized [axis-angle increment (3) | center (3)],
// d_intrinsics columns are [focal, k1, k2].
struct ProjectionExpansion {
  Eigen::Vector2d pixel;
  Eigen::Matrix<double, 2, 3> d_point;
  Eigen::Matrix<double, 2, 6> d_pose;
  Eigen::Matrix<double, 2, 3> d_intrinsics;
};
ProjectionExpansion project_with_jacobians(const Camera& camera, const Eigen::Vector3d& point);

// Unit world-space viewing ray through a pixel; origin is the camera
// center. project(camera, ray.at(d)) reproduces the pixel for any d > 0.
Ray pixel_ray(const Camera& camera, const Eigen::Vector2d& pixel);

// pixel_ray plus derivatives of the unit direction with respect to the
// intrinsics [focal, k1, k2], obtained by implicit differentiation of the
// fixed-point undistortion. Needed by hard-constrained bundle adjustment
// where anchor intrinsics stay free.
struct RayExpansion {
  Ray ray;
  Eigen::Matrix<double, 3, 3> d_direction_d_intrinsics;
};
RayExpansion pixel_ray_with_jacobians(const Camera& camera, const Eigen::Vector2d& pixel);

bool pixel_in_bounds(const Intrinsics& intrinsics, const Eigen::Vector2d& pixel, double margin = 0.0);

}  // namespace masfm
