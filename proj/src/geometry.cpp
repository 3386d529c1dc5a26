#include "masfm/geometry.hpp"

#include <cmath>

#include "masfm/error.hpp"
#include "masfm/lm.hpp"

namespace masfm {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) / kDegToRad;
}

// Isotropic Hartley normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::vector<Eigen::Vector2d>& points) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  const double s = mean_dist > 1e-15 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(),
       0, s, -s * centroid.y(),
       0, 0, 1;
  return t;
}

int count_distinct_matches(const std::vector<FeatureMatch>& matches) {
  int distinct = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    bool duplicate = false;
    for (std::size_t j = 0; j < i; ++j) {
      if (matches[i].pixel_a == matches[j].pixel_a && matches[i].pixel_b == matches[j].pixel_b) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) ++distinct;
  }
  return distinct;
}

class TriangulationProblem : public ResidualProblem {
 public:
  explicit TriangulationProblem(const std::vector<std::pair<Camera, Eigen::Vector2d>>& observations)
      : observations_(observations) {}

  int parameter_count() const override { return 3; }
  int residual_count() const override { return 2 * static_cast<int>(observations_.size()); }

  bool evaluate(const Eigen::VectorXd& params, Eigen::VectorXd& residuals) const override {
    const Eigen::Vector3d point = params;
    for (std::size_t i = 0; i < observations_.size(); ++i) {
      try {
        const Eigen::Vector2d pixel = project(observations_[i].first, point);
        residuals.segment<2>(2 * i) = pixel - observations_[i].second;
      } catch (const Error&) {
        return false;
      }
    }
    return true;
  }

  bool jacobian(const Eigen::VectorXd& params, Eigen::MatrixXd& jac) const override {
    const Eigen::Vector3d point = params;
    jac.resize(residual_count(), 3);
    for (std::size_t i = 0; i < observations_.size(); ++i) {
      try {
        jac.middleRows<2>(2 * i) = project_with_jacobians(observations_[i].first, point).d_point;
      } catch (const Error&) {
        return false;
      }
    }
    return true;
  }

 private:
  const std::vector<std::pair<Camera, Eigen::Vector2d>>& observations_;
};

}  // namespace

EpipolarLine EpipolarLine::from_homogeneous(const Eigen::Vector3d& line) {
  const double norm = line.head<2>().norm();
  if (norm < 1e-15) {
    throw Error(ErrorCode::ZeroLine, "line has zero direction coefficients");
  }
  return {line / norm};
}

Eigen::Vector3d triangulate(const std::vector<std::pair<Camera, Eigen::Vector2d>>& observations,
                            double min_angle_deg) {
  if (observations.size() < 2) {
    throw Error(ErrorCode::InsufficientParallax, "need at least two observations");
  }

  std::vector<Ray> rays;
  rays.reserve(observations.size());
  for (const auto& [camera, pixel] : observations) {
    rays.push_back(pixel_ray(camera, pixel));
  }

  // Linear least squares over sum_i || (I - d_i d_i^T) (X - o_i) ||^2.
  Eigen::Matrix3d lhs = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& ray : rays) {
    const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - ray.direction * ray.direction.transpose();
    lhs += proj;
    rhs += proj * ray.origin;
  }
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(lhs);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::InsufficientParallax, "viewing rays are parallel");
  }
  Eigen::Vector3d point = lu.solve(rhs);

  // One Levenberg-Marquardt pass over reprojection error.
  TriangulationProblem problem(observations);
  Eigen::VectorXd residuals(problem.residual_count());
  if (problem.evaluate(point, residuals)) {
    LmOptions options;
    options.max_iterations = 20;
    point = lm_minimize(problem, point, options).solution;
  }

  double max_angle = 0.0;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (std::size_t j = i + 1; j < rays.size(); ++j) {
      max_angle = std::max(max_angle, angle_between_deg(point - rays[i].origin, point - rays[j].origin));
    }
  }
  if (max_angle < min_angle_deg) {
    throw Error(ErrorCode::InsufficientParallax, "maximum pairwise ray angle below threshold");
  }

  for (const auto& [camera, pixel] : observations) {
    if (camera.pose.world_to_camera(point).z() <= 0.0) {
      throw Error(ErrorCode::BehindCamera, "triangulated point behind an observing camera");
    }
  }
  return point;
}

Eigen::Matrix3d estimate_fundamental(const std::vector<FeatureMatch>& matches, bool hartley_normalize) {
  if (matches.size() < 8) {
    throw Error(ErrorCode::DegenerateConfiguration, "need at least 8 matches");
  }
  if (count_distinct_matches(matches) < 8) {
    throw Error(ErrorCode::DegenerateConfiguration, "fewer than 8 distinct matches");
  }

  std::vector<Eigen::Vector2d> pts_a, pts_b;
  pts_a.reserve(matches.size());
  pts_b.reserve(matches.size());
  for (const auto& m : matches) {
    pts_a.push_back(m.pixel_a);
    pts_b.push_back(m.pixel_b);
  }
  const Eigen::Matrix3d t_a = hartley_normalize ? normalizing_transform(pts_a) : Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d t_b = hartley_normalize ? normalizing_transform(pts_b) : Eigen::Matrix3d::Identity();

  Eigen::MatrixXd design(matches.size(), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d a = t_a * pts_a[i].homogeneous();
    const Eigen::Vector3d b = t_b * pts_b[i].homogeneous();
    design.row(i) << b.x() * a.x(), b.x() * a.y(), b.x(),
                     b.y() * a.x(), b.y() * a.y(), b.y(),
                     a.x(), a.y(), 1.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Planar scenes legitimately leave a 3-dimensional null space (rank 6);
  // anything below that means the sample has collapsed.
  if (sv(5) < 1e-12 * std::max(sv(0), 1e-300)) {
    throw Error(ErrorCode::DegenerateConfiguration, "design matrix rank below 6");
  }

  const Eigen::VectorXd f_vec = svd.matrixV().col(8);
  Eigen::Matrix3d f_norm;
  f_norm << f_vec(0), f_vec(1), f_vec(2),
            f_vec(3), f_vec(4), f_vec(5),
            f_vec(6), f_vec(7), f_vec(8);

  // Enforce rank 2 by zeroing the smallest singular value.
  Eigen::JacobiSVD<Eigen::Matrix3d> f_svd(f_norm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = f_svd.singularValues();
  s(2) = 0.0;
  f_norm = f_svd.matrixU() * s.asDiagonal() * f_svd.matrixV().transpose();

  Eigen::Matrix3d fundamental = t_b.transpose() * f_norm * t_a;
  const double scale = fundamental.cwiseAbs().maxCoeff();
  if (scale > 1e-300) fundamental /= scale;
  return fundamental;
}

double epipolar_residual(const Eigen::Matrix3d& fundamental, const Eigen::Vector2d& pixel_a,
                         const Eigen::Vector2d& pixel_b) {
  const Eigen::Vector3d line = fundamental * pixel_a.homogeneous();
  return EpipolarLine::from_homogeneous(line).distance_to(pixel_b);
}

double sampson_distance(const Eigen::Matrix3d& fundamental, const Eigen::Vector2d& pixel_a,
                        const Eigen::Vector2d& pixel_b) {
  const Eigen::Vector3d a = pixel_a.homogeneous();
  const Eigen::Vector3d b = pixel_b.homogeneous();
  const Eigen::Vector3d f_a = fundamental * a;
  const Eigen::Vector3d ft_b = fundamental.transpose() * b;
  const double algebraic = b.dot(f_a);
  const double denom = f_a.head<2>().squaredNorm() + ft_b.head<2>().squaredNorm();
  if (denom < 1e-300) return std::numeric_limits<double>::infinity();
  return std::abs(algebraic) / std::sqrt(denom);
}

Eigen::Matrix3d estimate_homography(const std::vector<FeatureMatch>& matches, bool hartley_normalize) {
  if (matches.size() < 4) {
    throw Error(ErrorCode::DegenerateConfiguration, "need at least 4 matches");
  }
  std::vector<Eigen::Vector2d> pts_a, pts_b;
  pts_a.reserve(matches.size());
  pts_b.reserve(matches.size());
  for (const auto& m : matches) {
    pts_a.push_back(m.pixel_a);
    pts_b.push_back(m.pixel_b);
  }
  const Eigen::Matrix3d t_a = hartley_normalize ? normalizing_transform(pts_a) : Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d t_b = hartley_normalize ? normalizing_transform(pts_b) : Eigen::Matrix3d::Identity();

  Eigen::MatrixXd design(2 * matches.size(), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d a = t_a * pts_a[i].homogeneous();
    const Eigen::Vector3d b = t_b * pts_b[i].homogeneous();
    design.row(2 * i) << 0, 0, 0,
                         -b.z() * a.x(), -b.z() * a.y(), -b.z() * a.z(),
                         b.y() * a.x(), b.y() * a.y(), b.y() * a.z();
    design.row(2 * i + 1) << b.z() * a.x(), b.z() * a.y(), b.z() * a.z(),
                             0, 0, 0,
                             -b.x() * a.x(), -b.x() * a.y(), -b.x() * a.z();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) < 1e-9 * std::max(sv(0), 1e-300)) {
    throw Error(ErrorCode::DegenerateConfiguration, "homography design matrix rank deficient");
  }

  const Eigen::VectorXd h_vec = svd.matrixV().col(8);
  Eigen::Matrix3d h_norm;
  h_norm << h_vec(0), h_vec(1), h_vec(2),
            h_vec(3), h_vec(4), h_vec(5),
            h_vec(6), h_vec(7), h_vec(8);

  Eigen::Matrix3d homography = t_b.inverse() * h_norm * t_a;
  if (std::abs(homography(2, 2)) > 1e-12) {
    homography /= homography(2, 2);
  }
  return homography;
}

Eigen::Vector2d apply_homography(const Eigen::Matrix3d& homography, const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d mapped = homography * pixel.homogeneous();
  return mapped.hnormalized();
}

double symmetric_transfer_error(const Eigen::Matrix3d& homography, const Eigen::Matrix3d& homography_inv,
                                const Eigen::Vector2d& pixel_a, const Eigen::Vector2d& pixel_b) {
  const double forward = (apply_homography(homography, pixel_a) - pixel_b).squaredNorm();
  const double backward = (apply_homography(homography_inv, pixel_b) - pixel_a).squaredNorm();
  return std::sqrt(forward + backward);
}

Camera SimilarityTransform::apply(const Camera& camera) const {
  Camera out = camera;
  out.pose.center = apply(camera.pose.center);
  // x_cam = R_c (X - c) maps to R_c R^T ((X' - t)/s - ...) up to the
  // similarity; the rotation part composes as R_c * R^T.
  out.pose.rotation = Eigen::Quaterniond(camera.pose.rotation.toRotationMatrix() * rotation.transpose());
  out.pose.rotation.normalize();
  return out;
}

SimilarityTransform similarity_align(const std::vector<Eigen::Vector3d>& source,
                                     const std::vector<Eigen::Vector3d>& target) {
  if (source.size() != target.size() || source.size() < 3) {
    throw Error(ErrorCode::DegenerateConfiguration, "need at least 3 paired points");
  }
  const double n = static_cast<double>(source.size());

  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_t = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= n;
  mu_t /= n;

  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double source_variance = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Eigen::Vector3d ds = source[i] - mu_s;
    covariance += (target[i] - mu_t) * ds.transpose();
    source_variance += ds.squaredNorm();
  }
  covariance /= n;
  source_variance /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (source_variance < 1e-24 || sv(1) < 1e-12 * std::max(sv(0), 1e-300)) {
    throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear or coincident");
  }

  Eigen::Vector3d sign_fix = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    sign_fix(2) = -1.0;
  }

  SimilarityTransform result;
  result.rotation = svd.matrixU() * sign_fix.asDiagonal() * svd.matrixV().transpose();
  result.scale = sv.dot(sign_fix) / source_variance;
  result.translation = mu_t - result.scale * result.rotation * mu_s;

  double sse = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    sse += (target[i] - result.apply(source[i])).squaredNorm();
  }
  result.residual_mse = sse / n;
  return result;
}

}  // namespace masfm
