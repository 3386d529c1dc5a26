#include "masfm/eval.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "masfm/error.hpp"

namespace masfm {

namespace {

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

double geodesic_deg(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return 2.0 * std::acos(c) * 180.0 / M_PI;
}

}  // namespace

CompareResult compare_cameras(const std::map<ImageId, Camera>& estimated,
                              const std::map<ImageId, Camera>& truth,
                              const std::vector<Eigen::Vector3d>& eval_points,
                              const CompareOptions& options) {
  if (estimated.size() != truth.size()) {
    throw Error(ErrorCode::IdMismatch, "camera sets have different sizes");
  }
  for (const auto& [id, camera] : estimated) {
    (void)camera;
    if (!truth.count(id)) {
      throw Error(ErrorCode::IdMismatch, "image " + id + " missing from the truth set");
    }
  }

  CompareResult result;

  std::map<ImageId, Camera> aligned = estimated;
  if (options.align) {
    std::vector<Eigen::Vector3d> source, target;
    if (!options.alignment_pairs.empty()) {
      for (const auto& [est_point, truth_point] : options.alignment_pairs) {
        source.push_back(est_point);
        target.push_back(truth_point);
      }
    } else {
      for (const auto& [id, camera] : estimated) {
        source.push_back(camera.pose.center);
        target.push_back(truth.at(id).pose.center);
      }
    }
    SimilarityTransform transform;
    try {
      transform = similarity_align(source, target);
    } catch (const Error&) {
      throw Error(ErrorCode::AlignmentDegenerate, "similarity alignment points are degenerate");
    }
    for (auto& [id, camera] : aligned) {
      (void)id;
      camera = transform.apply(camera);
    }
    result.alignment = transform;
  }

  for (const auto& [id, est] : aligned) {
    const Camera& ref = truth.at(id);

    CameraErrors errors;
    errors.id = id;
    errors.rotation_deg = angle_deg(est.pose.view_direction(), ref.pose.view_direction());
    errors.rotation_geodesic_deg = geodesic_deg(est.pose.rotation, ref.pose.rotation);
    errors.translation = (est.pose.center - ref.pose.center).norm();

    int used = 0;
    double pixel_error = 0.0;
    for (const auto& point : eval_points) {
      Eigen::Vector2d est_pixel, ref_pixel;
      try {
        est_pixel = project(est, point);
        ref_pixel = project(ref, point);
      } catch (const Error&) {
        continue;  // probe behind one of the cameras
      }
      pixel_error += (est_pixel - ref_pixel).norm();
      ++used;
    }
    errors.reprojection_pct_width =
        used > 0 ? 100.0 * pixel_error / (used * ref.intrinsics.width) : 0.0;

    result.per_camera.push_back(errors);
  }

  for (const auto& errors : result.per_camera) {
    result.mean_rotation_deg += errors.rotation_deg;
    result.mean_translation += errors.translation;
    result.mean_reprojection_pct_width += errors.reprojection_pct_width;
  }
  const double n = std::max<std::size_t>(result.per_camera.size(), 1);
  result.mean_rotation_deg /= n;
  result.mean_translation /= n;
  result.mean_reprojection_pct_width /= n;
  return result;
}

std::string metrics_to_text(const CompareResult& result) {
  std::ostringstream out;
  char line[160];
  out << "image            rot(deg)    rot_geo(deg)   trans        reproj(%w)\n";
  for (const auto& e : result.per_camera) {
    std::snprintf(line, sizeof(line), "%-14s %11.6f %14.6f %12.6g %12.6g\n", e.id.c_str(),
                  e.rotation_deg, e.rotation_geodesic_deg, e.translation, e.reprojection_pct_width);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-14s %11.6f %14s %12.6g %12.6g\n", "mean",
                result.mean_rotation_deg, "-", result.mean_translation,
                result.mean_reprojection_pct_width);
  out << line;
  return out.str();
}

std::string metrics_to_json(const CompareResult& result) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::object();
  for (const auto& e : result.per_camera) {
    doc["cameras"][e.id] = {{"rotation_deg", e.rotation_deg},
                            {"rotation_geodesic_deg", e.rotation_geodesic_deg},
                            {"translation", e.translation},
                            {"reprojection_pct_width", e.reprojection_pct_width}};
  }
  doc["mean"] = {{"rotation_deg", result.mean_rotation_deg},
                 {"translation", result.mean_translation},
                 {"reprojection_pct_width", result.mean_reprojection_pct_width}};
  if (result.alignment) {
    doc["alignment"] = {{"scale", result.alignment->scale},
                        {"residual_mse", result.alignment->residual_mse}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace masfm
