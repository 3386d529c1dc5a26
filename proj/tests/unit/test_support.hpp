#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"
#include "masfm/error.hpp"
#include "masfm/geometry.hpp"
#include "masfm/lm.hpp"
#include "masfm/rng.hpp"

namespace masfm::test {

// Runs f and reports the thrown masfm error code, if any.
template <typename F>
std::optional<ErrorCode> thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& error) {
    return error.code();
  }
  return std::nullopt;
}

inline Camera basic_camera(double focal = 100.0, int width = 640, int height = 480) {
  Camera camera;
  camera.intrinsics.focal_px = focal;
  camera.intrinsics.width = width;
  camera.intrinsics.height = height;
  return camera;
}

inline Pose look_at_pose(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
  right.normalize();
  Eigen::Matrix3d rot;
  rot.row(0) = right;
  rot.row(1) = forward.cross(right);
  rot.row(2) = forward;
  Pose pose;
  pose.rotation = Eigen::Quaterniond(rot).normalized();
  pose.center = position;
  return pose;
}

inline Pose random_pose(Rng& rng, double center_radius = 10.0) {
  Pose pose;
  Eigen::Vector3d axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitZ();
  pose.rotation = rotation_increment(axis.normalized() * rng.uniform(0.0, M_PI));
  pose.center = center_radius * Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
  return pose;
}

inline Pose perturb_pose(const Pose& pose, Rng& rng, double angle_deg, double center_offset) {
  Pose out = pose;
  Eigen::Vector3d axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitX();
  out.rotation = rotation_increment(axis.normalized() * angle_deg * M_PI / 180.0) * out.rotation;
  out.rotation.normalize();
  Eigen::Vector3d shift(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (shift.norm() < 1e-9) shift = Eigen::Vector3d::UnitY();
  out.center += shift.normalized() * center_offset;
  return out;
}

inline double rotation_error_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return 2.0 * std::acos(c) * 180.0 / M_PI;
}

// Independent central finite differences in tangent coordinates; the test
// oracle for every analytic Jacobian in the library.
inline Eigen::MatrixXd numeric_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x,
                                        double step = 1e-6) {
  Eigen::MatrixXd jac(problem.residual_count(), problem.tangent_count());
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(problem.tangent_count());
  Eigen::VectorXd r_plus(problem.residual_count()), r_minus(problem.residual_count());
  for (int j = 0; j < problem.tangent_count(); ++j) {
    delta[j] = step;
    if (!problem.evaluate(problem.plus(x, delta), r_plus)) throw std::runtime_error("fd probe invalid");
    delta[j] = -step;
    if (!problem.evaluate(problem.plus(x, delta), r_minus)) throw std::runtime_error("fd probe invalid");
    delta[j] = 0.0;
    jac.col(j) = (r_plus - r_minus) / (2.0 * step);
  }
  return jac;
}

struct JacobianCheck {
  double worst_abs = 0.0;
  double worst_rel = 0.0;
  bool ok = true;
};

inline JacobianCheck check_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x,
                                    double abs_tol = 1e-5, double rel_tol = 1e-4) {
  Eigen::MatrixXd analytic;
  if (!problem.jacobian(x, analytic)) throw std::runtime_error("problem has no analytic jacobian");
  const Eigen::MatrixXd numeric = numeric_jacobian(problem, x);
  JacobianCheck check;
  for (int r = 0; r < analytic.rows(); ++r) {
    for (int c = 0; c < analytic.cols(); ++c) {
      const double diff = std::abs(analytic(r, c) - numeric(r, c));
      const double scale = std::max(std::abs(analytic(r, c)), std::abs(numeric(r, c)));
      check.worst_abs = std::max(check.worst_abs, diff);
      if (diff > abs_tol && diff > rel_tol * scale) {
        check.ok = false;
        check.worst_rel = std::max(check.worst_rel, scale > 0 ? diff / scale : diff);
      }
    }
  }
  return check;
}

// Two-camera test rig looking at a shared point cloud in front of both.
struct TwoViewScene {
  Camera camera_a;
  Camera camera_b;
  std::vector<Eigen::Vector3d> points;
  std::vector<FeatureMatch> matches;  // exact projections
};

inline TwoViewScene make_two_view_scene(Rng& rng, int point_count = 60, double baseline = 2.0,
                                        bool planar = false) {
  TwoViewScene scene;
  scene.camera_a = basic_camera(600.0);
  scene.camera_b = basic_camera(600.0);
  scene.camera_a.pose = look_at_pose({-baseline / 2, 0.0, 0.0}, {0.0, 0.0, 10.0});
  scene.camera_b.pose = look_at_pose({baseline / 2, 0.4, -0.2}, {0.0, 0.0, 10.0});

  while (static_cast<int>(scene.points.size()) < point_count) {
    Eigen::Vector3d point(rng.uniform(-4.0, 4.0), rng.uniform(-3.0, 3.0),
                          planar ? 10.0 : rng.uniform(7.0, 14.0));
    Eigen::Vector2d pa, pb;
    try {
      pa = project(scene.camera_a, point);
      pb = project(scene.camera_b, point);
    } catch (const Error&) {
      continue;
    }
    if (!pixel_in_bounds(scene.camera_a.intrinsics, pa) ||
        !pixel_in_bounds(scene.camera_b.intrinsics, pb)) {
      continue;
    }
    scene.points.push_back(point);
    scene.matches.push_back({"a", "b", pa, pb});
  }
  return scene;
}

}  // namespace masfm::test
