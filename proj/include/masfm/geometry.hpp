#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"

namespace masfm {

using ImageId = std::string;

struct FeatureMatch {
  ImageId image_a;
  ImageId image_b;
  Eigen::Vector2d pixel_a;
  Eigen::Vector2d pixel_b;
};

struct TrackObservation {
  ImageId image;
  Eigen::Vector2d pixel;
};

// Feature observations of one physical point across several images.
struct Track {
  std::vector<TrackObservation> observations;
  std::optional<Eigen::Vector3d> point;
  bool anchor_seen = false;

  const TrackObservation* observation_in(const ImageId& image) const {
    for (const auto& obs : observations) {
      if (obs.image == image) return &obs;
    }
    return nullptr;
  }
};

// Line a*u + b*v + c = 0 with a^2 + b^2 = 1.
struct EpipolarLine {
  Eigen::Vector3d coefficients;

  static EpipolarLine from_homogeneous(const Eigen::Vector3d& line);
  double distance_to(const Eigen::Vector2d& pixel) const {
    return std::abs(signed_distance_to(pixel));
  }
  double signed_distance_to(const Eigen::Vector2d& pixel) const {
    return coefficients.x() * pixel.x() + coefficients.y() * pixel.y() + coefficients.z();
  }
};

// Linear least-squares intersection of the undistorted viewing rays,
// refined with one Levenberg-Marquardt pass over reprojection error.
// Throws InsufficientParallax when the widest pair of viewing rays at the
// candidate point is closer than min_angle_deg, and BehindCamera when the
// point lands behind any observing camera.
Eigen::Vector3d triangulate(const std::vector<std::pair<Camera, Eigen::Vector2d>>& observations,
                            double min_angle_deg = 2.0);

// Normalized 8-point fundamental matrix with the rank-2 constraint
// enforced; x_b^T F x_a = 0. Hartley normalization can be bypassed for
// conditioning experiments.
Eigen::Matrix3d estimate_fundamental(const std::vector<FeatureMatch>& matches,
                                     bool hartley_normalize = true);

// Perpendicular distance in pixels from pixel_b to the line F * [pixel_a; 1].
double epipolar_residual(const Eigen::Matrix3d& fundamental, const Eigen::Vector2d& pixel_a,
                         const Eigen::Vector2d& pixel_b);

// First-order geometric (Sampson) distance in pixels for x_b^T F x_a = 0.
double sampson_distance(const Eigen::Matrix3d& fundamental, const Eigen::Vector2d& pixel_a,
                        const Eigen::Vector2d& pixel_b);

// Normalized DLT homography mapping pixel_a to pixel_b, scaled so the
// bottom-right entry is 1 when it is nonzero.
Eigen::Matrix3d estimate_homography(const std::vector<FeatureMatch>& matches,
                                    bool hartley_normalize = true);

Eigen::Vector2d apply_homography(const Eigen::Matrix3d& homography, const Eigen::Vector2d& pixel);

// sqrt(d(x_b, H x_a)^2 + d(x_a, H^-1 x_b)^2) in pixels.
double symmetric_transfer_error(const Eigen::Matrix3d& homography, const Eigen::Matrix3d& homography_inv,
                                const Eigen::Vector2d& pixel_a, const Eigen::Vector2d& pixel_b);

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double residual_mse = 0.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& point) const {
    return scale * (rotation * point) + translation;
  }
  Camera apply(const Camera& camera) const;
};

// Least-squares similarity fit target ~ s * R * source + t (Umeyama
// closed form). Rotation determinant is +1.
SimilarityTransform similarity_align(const std::vector<Eigen::Vector3d>& source,
                                     const std::vector<Eigen::Vector3d>& target);

}  // namespace masfm
