#include "masfm/bundle.hpp"

#include <algorithm>
#include <cmath>

#include "masfm/error.hpp"

namespace masfm {

namespace {

enum class PoseKind { Free, Fixed, SphereCenter };

struct CameraLayout {
  PoseKind pose_kind = PoseKind::Free;
  bool inert = false;  // zero observations and excluded pose: carried through
  int pose_ambient = -1;  // offset of [qw qx qy qz cx cy cz], -1 when fixed
  int pose_tangent = -1;  // offset of the 6 (or 3+2) pose tangent dims
  int intr_ambient = -1;  // offset of [f k1 k2]
  int intr_tangent = -1;
  // Sphere gauge data (classic mode without anchors).
  Eigen::Vector3d sphere_center = Eigen::Vector3d::Zero();
  double sphere_radius = 0.0;
};

struct TrackLayout {
  bool on_ray = false;
  int anchor_camera = -1;       // when on_ray
  Eigen::Vector2d anchor_pixel = Eigen::Vector2d::Zero();
  int ambient = -1;             // offset of t (1) or point (3)
  int tangent = -1;
};

// Deterministic orthonormal basis of the plane perpendicular to a unit vector.
Eigen::Matrix<double, 3, 2> tangent_basis(const Eigen::Vector3d& unit) {
  const Eigen::Vector3d axis = std::abs(unit.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                                        : Eigen::Vector3d::UnitY();
  Eigen::Matrix<double, 3, 2> basis;
  basis.col(0) = unit.cross(axis).normalized();
  basis.col(1) = unit.cross(basis.col(0)).normalized();
  return basis;
}

class BundleAdjustProblem : public ResidualProblem {
 public:
  BundleAdjustProblem(const BundleProblem& problem, std::vector<std::string>& warnings)
      : problem_(problem) {
    const int n_cameras = static_cast<int>(problem.cameras.size());
    const bool constrained = problem.mode != BundleMode::Classic;

    std::vector<bool> is_anchor(n_cameras, false);
    for (int idx : problem.anchor_indices) is_anchor[idx] = true;

    // Observations that cannot be evaluated at the initial state (point
    // behind the camera) are dropped up front; the solver cannot start
    // from invalid residuals.
    tracks_obs_.resize(problem.tracks.size());
    for (std::size_t u = 0; u < problem.tracks.size(); ++u) {
      for (const auto& obs : problem.tracks[u].observations) {
        bool valid = true;
        try {
          project(problem.cameras[obs.camera], problem.tracks[u].point);
        } catch (const Error&) {
          valid = false;
        }
        if (valid) {
          tracks_obs_[u].push_back(obs);
        } else {
          warnings.push_back("track " + std::to_string(u) + " observation in camera " +
                             std::to_string(obs.camera) +
                             " invalid at the initial point; observation dropped");
        }
      }
    }

    std::vector<int> observation_counts(n_cameras, 0);
    for (const auto& observations : tracks_obs_) {
      for (const auto& obs : observations) ++observation_counts[obs.camera];
    }

    // Decide which poses stay out of the parameter vector.
    std::vector<PoseKind> pose_kinds(n_cameras, PoseKind::Free);
    if (constrained) {
      for (int i = 0; i < n_cameras; ++i) {
        if (is_anchor[i]) pose_kinds[i] = PoseKind::Fixed;
      }
    } else if (!problem.anchor_indices.empty()) {
      pose_kinds[*std::min_element(problem.anchor_indices.begin(), problem.anchor_indices.end())] =
          PoseKind::Fixed;
    } else {
      if (n_cameras < 2) {
        throw Error(ErrorCode::UnderConstrained, "classic mode without an anchor needs >= 2 cameras");
      }
      pose_kinds[0] = PoseKind::Fixed;
      pose_kinds[1] = PoseKind::SphereCenter;
    }

    // Weights (soft mode residual scaling).
    weights_.assign(n_cameras, 1.0);
    if (problem.mode == BundleMode::SoftConstrained) {
      if (!problem.weights.empty()) {
        if (static_cast<int>(problem.weights.size()) != n_cameras) {
          throw Error(ErrorCode::UnderConstrained, "weights size must match camera count");
        }
        weights_ = problem.weights;
      } else {
        for (int i = 0; i < n_cameras; ++i) {
          weights_[i] = is_anchor[i] ? problem.anchor_weight : 1.0;
        }
      }
      for (double w : weights_) {
        if (!(w > 0.0)) throw Error(ErrorCode::UnderConstrained, "weights must be positive");
      }
    }

    // Camera blocks. A camera with an excluded pose and no observations is
    // carried through untouched (nothing constrains it).
    cameras_.resize(n_cameras);
    for (int i = 0; i < n_cameras; ++i) {
      CameraLayout& layout = cameras_[i];
      layout.pose_kind = pose_kinds[i];
      if (observation_counts[i] == 0 && layout.pose_kind == PoseKind::Fixed) {
        layout.inert = true;
        continue;
      }
      if (layout.pose_kind != PoseKind::Fixed) {
        layout.pose_ambient = ambient_size_;
        layout.pose_tangent = tangent_size_;
        ambient_size_ += 7;
        tangent_size_ += layout.pose_kind == PoseKind::Free ? 6 : 5;
      }
      if (layout.pose_kind == PoseKind::SphereCenter) {
        layout.sphere_center = problem.cameras[0].pose.center;
        layout.sphere_radius = (problem.cameras[i].pose.center - layout.sphere_center).norm();
        if (layout.sphere_radius < 1e-12) {
          throw Error(ErrorCode::UnderConstrained, "cameras 0 and 1 are coincident; scale gauge unfixed");
        }
      }
      layout.intr_ambient = ambient_size_;
      layout.intr_tangent = tangent_size_;
      ambient_size_ += 3;
      tangent_size_ += 3;
    }

    // Track blocks; hard mode re-parameterizes anchor-seen tracks.
    tracks_.resize(problem.tracks.size());
    for (std::size_t u = 0; u < problem.tracks.size(); ++u) {
      TrackLayout& layout = tracks_[u];
      if (problem.mode == BundleMode::HardConstrained) {
        for (int anchor : problem.anchor_indices) {
          for (const auto& obs : tracks_obs_[u]) {
            if (obs.camera == anchor) {
              layout.on_ray = true;
              layout.anchor_camera = anchor;
              layout.anchor_pixel = obs.pixel;
              break;
            }
          }
          if (layout.on_ray) break;
        }
      }
      if (layout.on_ray) {
        const Camera& anchor_cam = problem.cameras[layout.anchor_camera];
        const Ray ray = pixel_ray(anchor_cam, layout.anchor_pixel);
        const double t = (problem.tracks[u].point - ray.origin).dot(ray.direction);
        if (t <= 1e-9) {
          warnings.push_back("track " + std::to_string(u) +
                             " lies behind its anchor ray; constraint dropped");
          layout.on_ray = false;
        } else {
          initial_ray_depths_.push_back(t);
        }
      }
      layout.ambient = ambient_size_;
      layout.tangent = tangent_size_;
      ambient_size_ += layout.on_ray ? 1 : 3;
      tangent_size_ += layout.on_ray ? 1 : 3;
    }

    residual_count_ = 0;
    for (const auto& observations : tracks_obs_) {
      residual_count_ += 2 * static_cast<int>(observations.size());
    }

    // With exactly one observed camera pose held fixed, uniform scaling of
    // everything about that center leaves every residual unchanged. Pin
    // the leftover scale gauge by renormalizing to the initial scale after
    // each accepted step (the sphere chart already covers the no-anchor
    // classic case).
    int fixed_observed_poses = 0;
    bool has_sphere = false;
    for (std::size_t i = 0; i < cameras_.size(); ++i) {
      if (cameras_[i].inert) continue;
      if (cameras_[i].pose_kind == PoseKind::Fixed) {
        ++fixed_observed_poses;
        scale_origin_ = problem.cameras[i].pose.center;
      }
      if (cameras_[i].pose_kind == PoseKind::SphereCenter) has_sphere = true;
    }
    scale_retraction_ = fixed_observed_poses == 1 && !has_sphere;
    if (scale_retraction_) {
      const double initial_scale = scale_functional(initial_parameters());
      if (initial_scale > 1e-12) {
        scale_target_ = initial_scale;
      } else {
        scale_retraction_ = false;
      }
    }
  }

  int parameter_count() const override { return ambient_size_; }
  int tangent_count() const override { return tangent_size_; }
  int residual_count() const override { return residual_count_; }

  Eigen::VectorXd initial_parameters() const {
    Eigen::VectorXd x(ambient_size_);
    std::size_t ray_index = 0;
    for (std::size_t i = 0; i < cameras_.size(); ++i) {
      const CameraLayout& layout = cameras_[i];
      if (layout.inert) continue;
      const Camera& cam = problem_.cameras[i];
      if (layout.pose_ambient >= 0) {
        x.segment<4>(layout.pose_ambient) << cam.pose.rotation.w(), cam.pose.rotation.x(),
            cam.pose.rotation.y(), cam.pose.rotation.z();
        x.segment<3>(layout.pose_ambient + 4) = cam.pose.center;
      }
      x.segment<3>(layout.intr_ambient) << cam.intrinsics.focal_px, cam.intrinsics.k1,
          cam.intrinsics.k2;
    }
    for (std::size_t u = 0; u < tracks_.size(); ++u) {
      if (tracks_[u].on_ray) {
        x(tracks_[u].ambient) = initial_ray_depths_[ray_index++];
      } else {
        x.segment<3>(tracks_[u].ambient) = problem_.tracks[u].point;
      }
    }
    return x;
  }

  Eigen::VectorXd plus(const Eigen::VectorXd& params, const Eigen::VectorXd& delta) const override {
    Eigen::VectorXd out = params;
    for (const auto& layout : cameras_) {
      if (layout.inert) continue;
      if (layout.pose_kind == PoseKind::Free) {
        apply_rotation_increment(out, layout.pose_ambient, delta.segment<3>(layout.pose_tangent));
        out.segment<3>(layout.pose_ambient + 4) += delta.segment<3>(layout.pose_tangent + 3);
        out.segment<3>(layout.intr_ambient) += delta.segment<3>(layout.intr_tangent);
      } else if (layout.pose_kind == PoseKind::SphereCenter) {
        apply_rotation_increment(out, layout.pose_ambient, delta.segment<3>(layout.pose_tangent));
        const Eigen::Vector3d dir =
            (params.segment<3>(layout.pose_ambient + 4) - layout.sphere_center).normalized();
        const Eigen::Matrix<double, 3, 2> basis = tangent_basis(dir);
        const Eigen::Vector3d moved = (dir + basis * delta.segment<2>(layout.pose_tangent + 3)).normalized();
        out.segment<3>(layout.pose_ambient + 4) = layout.sphere_center + layout.sphere_radius * moved;
        out.segment<3>(layout.intr_ambient) += delta.segment<3>(layout.intr_tangent);
      } else {
        out.segment<3>(layout.intr_ambient) += delta.segment<3>(layout.intr_tangent);
      }
    }
    for (const auto& layout : tracks_) {
      if (layout.on_ray) {
        out(layout.ambient) += delta(layout.tangent);
      } else {
        out.segment<3>(layout.ambient) += delta.segment<3>(layout.tangent);
      }
    }
    return out;
  }

  bool evaluate(const Eigen::VectorXd& params, Eigen::VectorXd& residuals) const override {
    residuals.resize(residual_count_);
    return walk_observations(params, &residuals, nullptr, nullptr, nullptr);
  }

  bool jacobian(const Eigen::VectorXd& params, Eigen::MatrixXd& jac) const override {
    jac.setZero(residual_count_, tangent_size_);
    Eigen::VectorXd residuals(residual_count_);
    return walk_observations(params, &residuals, &jac, nullptr, nullptr);
  }

  bool normal_equations(const Eigen::VectorXd& params, Eigen::MatrixXd& hessian,
                        Eigen::VectorXd& gradient, double* cost) const override {
    hessian.setZero(tangent_size_, tangent_size_);
    gradient.setZero(tangent_size_);
    Eigen::VectorXd residuals(residual_count_);
    if (!walk_observations(params, &residuals, nullptr, &hessian, &gradient)) return false;
    if (cost) *cost = 0.5 * residuals.squaredNorm();
    // Accumulation fills the upper triangle; mirror it.
    hessian.triangularView<Eigen::StrictlyLower>() =
        hessian.triangularView<Eigen::StrictlyUpper>().transpose();
    return hessian.allFinite() && gradient.allFinite();
  }

  // Mean distance of free camera centers and points from the fixed center;
  // linear in the gauge scale.
  double scale_functional(const Eigen::VectorXd& params) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& layout : cameras_) {
      if (layout.inert || layout.pose_ambient < 0) continue;
      sum += (params.segment<3>(layout.pose_ambient + 4) - scale_origin_).norm();
      ++count;
    }
    for (const auto& layout : tracks_) {
      if (layout.on_ray) {
        sum += params(layout.ambient);
      } else {
        sum += (params.segment<3>(layout.ambient) - scale_origin_).norm();
      }
      ++count;
    }
    return count > 0 ? sum / count : 0.0;
  }

  void retract(Eigen::VectorXd& params) const override {
    if (!scale_retraction_) return;
    const double current = scale_functional(params);
    if (current < 1e-12) return;
    const double s = scale_target_ / current;
    if (std::abs(s - 1.0) < 1e-15) return;
    for (const auto& layout : cameras_) {
      if (layout.inert || layout.pose_ambient < 0) continue;
      params.segment<3>(layout.pose_ambient + 4) =
          scale_origin_ + s * (params.segment<3>(layout.pose_ambient + 4) - scale_origin_);
    }
    for (const auto& layout : tracks_) {
      if (layout.on_ray) {
        params(layout.ambient) *= s;
      } else {
        params.segment<3>(layout.ambient) =
            scale_origin_ + s * (params.segment<3>(layout.ambient) - scale_origin_);
      }
    }
  }

  Camera camera_at(const Eigen::VectorXd& params, int index) const {
    const CameraLayout& layout = cameras_[index];
    Camera cam = problem_.cameras[index];
    if (layout.inert) return cam;
    if (layout.pose_ambient >= 0) {
      cam.pose.rotation = Eigen::Quaterniond(params(layout.pose_ambient), params(layout.pose_ambient + 1),
                                             params(layout.pose_ambient + 2), params(layout.pose_ambient + 3));
      cam.pose.rotation.normalize();
      cam.pose.center = params.segment<3>(layout.pose_ambient + 4);
    }
    cam.intrinsics.focal_px = params(layout.intr_ambient);
    cam.intrinsics.k1 = params(layout.intr_ambient + 1);
    cam.intrinsics.k2 = params(layout.intr_ambient + 2);
    return cam;
  }

  // Final point position for a track (exactly on its anchor ray when constrained).
  Eigen::Vector3d point_at(const Eigen::VectorXd& params, int track) const {
    const TrackLayout& layout = tracks_[track];
    if (!layout.on_ray) return params.segment<3>(layout.ambient);
    const Camera anchor = camera_at(params, layout.anchor_camera);
    const Ray ray = pixel_ray(anchor, layout.anchor_pixel);
    return ray.at(params(layout.ambient));
  }

  bool track_on_ray(int track) const { return tracks_[track].on_ray; }
  int track_anchor(int track) const { return tracks_[track].anchor_camera; }

 private:
  static void apply_rotation_increment(Eigen::VectorXd& params, int offset,
                                       const Eigen::Vector3d& delta) {
    Eigen::Quaterniond q(params(offset), params(offset + 1), params(offset + 2), params(offset + 3));
    q = rotation_increment(delta) * q;
    q.normalize();
    params(offset) = q.w();
    params(offset + 1) = q.x();
    params(offset + 2) = q.y();
    params(offset + 3) = q.z();
  }

  struct JacobianEntry {
    int column;
    Eigen::Vector2d value;  // one column of the 2-row block
  };

  // Shared engine for evaluate / dense jacobian / fused normal equations.
  bool walk_observations(const Eigen::VectorXd& params, Eigen::VectorXd* residuals,
                         Eigen::MatrixXd* dense_jacobian, Eigen::MatrixXd* hessian,
                         Eigen::VectorXd* gradient) const {
    const bool want_jacobian = dense_jacobian != nullptr || hessian != nullptr;

    std::vector<Camera> cameras(cameras_.size());
    for (std::size_t i = 0; i < cameras_.size(); ++i) cameras[i] = camera_at(params, static_cast<int>(i));

    // Ray expansions for anchor-constrained tracks (depend on anchor intrinsics only).
    std::vector<RayExpansion> rays(tracks_.size());
    for (std::size_t u = 0; u < tracks_.size(); ++u) {
      if (!tracks_[u].on_ray) continue;
      try {
        rays[u] = pixel_ray_with_jacobians(cameras[tracks_[u].anchor_camera], tracks_[u].anchor_pixel);
      } catch (const Error&) {
        return false;
      }
    }

    std::vector<JacobianEntry> entries;
    entries.reserve(16);

    int row = 0;
    for (std::size_t u = 0; u < tracks_obs_.size(); ++u) {
      const TrackLayout& track = tracks_[u];

      Eigen::Vector3d point;
      double ray_depth = 0.0;
      if (track.on_ray) {
        ray_depth = params(track.ambient);
        if (ray_depth <= 0.0) return false;
        point = rays[u].ray.at(ray_depth);
      } else {
        point = params.segment<3>(track.ambient);
      }

      for (const auto& obs : tracks_obs_[u]) {
        const double sqrt_weight = std::sqrt(weights_[obs.camera]);

        ProjectionExpansion expansion;
        try {
          expansion = project_with_jacobians(cameras[obs.camera], point);
        } catch (const Error&) {
          return false;
        }
        const Eigen::Vector2d residual = sqrt_weight * (expansion.pixel - obs.pixel);
        if (residuals) residuals->segment<2>(row) = residual;

        if (want_jacobian) {
          entries.clear();
          const CameraLayout& cam = cameras_[obs.camera];

          if (cam.pose_kind == PoseKind::Free) {
            for (int k = 0; k < 6; ++k) {
              entries.push_back({cam.pose_tangent + k, sqrt_weight * expansion.d_pose.col(k)});
            }
          } else if (cam.pose_kind == PoseKind::SphereCenter) {
            for (int k = 0; k < 3; ++k) {
              entries.push_back({cam.pose_tangent + k, sqrt_weight * expansion.d_pose.col(k)});
            }
            const Eigen::Vector3d dir =
                (params.segment<3>(cam.pose_ambient + 4) - cam.sphere_center).normalized();
            const Eigen::Matrix<double, 3, 2> basis = tangent_basis(dir);
            const Eigen::Matrix<double, 2, 2> block =
                expansion.d_pose.rightCols<3>() * (cam.sphere_radius * basis);
            for (int k = 0; k < 2; ++k) {
              entries.push_back({cam.pose_tangent + 3 + k, sqrt_weight * block.col(k)});
            }
          }
          for (int k = 0; k < 3; ++k) {
            entries.push_back({cam.intr_tangent + k, sqrt_weight * expansion.d_intrinsics.col(k)});
          }

          if (track.on_ray) {
            entries.push_back(
                {track.tangent, sqrt_weight * (expansion.d_point * rays[u].ray.direction)});
            // Anchor intrinsics move the ray and therefore the point.
            const Eigen::Matrix<double, 2, 3> through_ray =
                expansion.d_point * (ray_depth * rays[u].d_direction_d_intrinsics);
            const int anchor_intr = cameras_[track.anchor_camera].intr_tangent;
            for (int k = 0; k < 3; ++k) {
              entries.push_back({anchor_intr + k, sqrt_weight * through_ray.col(k)});
            }
          } else {
            for (int k = 0; k < 3; ++k) {
              entries.push_back({track.tangent + k, sqrt_weight * expansion.d_point.col(k)});
            }
          }

          if (dense_jacobian) {
            for (const auto& entry : entries) {
              dense_jacobian->block<2, 1>(row, entry.column) += entry.value;
            }
          }
          if (hessian) {
            for (std::size_t a = 0; a < entries.size(); ++a) {
              (*gradient)(entries[a].column) += entries[a].value.dot(residual);
              for (std::size_t b = a; b < entries.size(); ++b) {
                const int ca = entries[a].column;
                const int cb = entries[b].column;
                const double value = entries[a].value.dot(entries[b].value);
                if (ca <= cb) {
                  (*hessian)(ca, cb) += value;
                } else {
                  (*hessian)(cb, ca) += value;
                }
              }
            }
          }
        }
        row += 2;
      }
    }
    return true;
  }

  const BundleProblem& problem_;
  std::vector<std::vector<BundleObservation>> tracks_obs_;  // invalid observations removed
  bool scale_retraction_ = false;
  Eigen::Vector3d scale_origin_ = Eigen::Vector3d::Zero();
  double scale_target_ = 0.0;
  std::vector<CameraLayout> cameras_;
  std::vector<TrackLayout> tracks_;
  std::vector<double> weights_;
  std::vector<double> initial_ray_depths_;
  int ambient_size_ = 0;
  int tangent_size_ = 0;
  int residual_count_ = 0;
};

}  // namespace

BundleExpansion make_bundle_residual_problem(const BundleProblem& problem) {
  BundleExpansion expansion;
  auto adjust = std::make_unique<BundleAdjustProblem>(problem, expansion.warnings);
  expansion.initial_parameters = adjust->initial_parameters();
  expansion.residual_problem = std::move(adjust);
  return expansion;
}

const char* bundle_mode_name(BundleMode mode) {
  switch (mode) {
    case BundleMode::Classic: return "classic";
    case BundleMode::HardConstrained: return "hard";
    case BundleMode::SoftConstrained: return "soft";
  }
  return "unknown";
}

BundleResult bundle_adjust(const BundleProblem& problem, const BundleOptions& options) {
  if (problem.mode != BundleMode::Classic && problem.anchor_indices.empty()) {
    throw Error(ErrorCode::UnderConstrained, "constrained bundle adjustment needs an anchor");
  }
  for (int idx : problem.anchor_indices) {
    if (idx < 0 || idx >= static_cast<int>(problem.cameras.size())) {
      throw Error(ErrorCode::UnderConstrained, "anchor index out of range");
    }
  }
  std::vector<bool> pose_excluded(problem.cameras.size(), false);
  if (problem.mode != BundleMode::Classic) {
    for (int idx : problem.anchor_indices) pose_excluded[idx] = true;
  } else if (!problem.anchor_indices.empty()) {
    pose_excluded[*std::min_element(problem.anchor_indices.begin(), problem.anchor_indices.end())] =
        true;
  }
  std::vector<int> observation_counts(problem.cameras.size(), 0);
  for (const auto& track : problem.tracks) {
    for (const auto& obs : track.observations) {
      if (obs.camera < 0 || obs.camera >= static_cast<int>(problem.cameras.size())) {
        throw Error(ErrorCode::UnderConstrained, "observation camera index out of range");
      }
      ++observation_counts[obs.camera];
    }
  }
  for (std::size_t i = 0; i < observation_counts.size(); ++i) {
    // A pose-excluded camera with no observations is carried through
    // untouched; anything else below 6 observations is rejected.
    if (observation_counts[i] == 0 && pose_excluded[i]) continue;
    if (observation_counts[i] < 6) {
      throw Error(ErrorCode::UnderConstrained,
                  "camera " + std::to_string(i) + " observes fewer than 6 tracks");
    }
  }

  BundleResult result;
  BundleAdjustProblem adjust(problem, result.warnings);

  LmResult lm = lm_minimize(adjust, adjust.initial_parameters(), options.lm);

  result.cameras.resize(problem.cameras.size());
  for (std::size_t i = 0; i < problem.cameras.size(); ++i) {
    result.cameras[i] = adjust.camera_at(lm.solution, static_cast<int>(i));
  }
  result.points.resize(problem.tracks.size());
  for (std::size_t u = 0; u < problem.tracks.size(); ++u) {
    result.points[u] = adjust.point_at(lm.solution, static_cast<int>(u));
    if (adjust.track_on_ray(static_cast<int>(u))) {
      result.ray_constrained_tracks.emplace_back(static_cast<int>(u),
                                                 adjust.track_anchor(static_cast<int>(u)));
    }
  }
  result.report = std::move(lm.report);
  return result;
}

}  // namespace masfm
