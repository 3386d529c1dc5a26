#include "masfm/occlusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "masfm/error.hpp"

namespace masfm {

const char* occlusion_reason_name(OcclusionReason reason) {
  switch (reason) {
    case OcclusionReason::DepthGap: return "depth_gap";
    case OcclusionReason::NormalDisagreement: return "normal_disagreement";
    case OcclusionReason::NoIntersection: return "no_intersection";
  }
  return "unknown";
}

StaticOcclusionResult classify_static_occlusions(const std::vector<OrientedPoint>& cloud,
                                                 const TriangleMesh& mesh, const Camera& camera,
                                                 const StaticOcclusionOptions& options) {
  StaticOcclusionResult result;
  result.verdicts.reserve(cloud.size());
  const double angle_threshold_rad = options.normal_angle_deg * M_PI / 180.0;

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const OrientedPoint& sample = cloud[i];

    Eigen::Vector2d pixel;
    try {
      pixel = project(camera, sample.point);
    } catch (const Error&) {
      result.warnings.push_back("point " + std::to_string(i) + " behind camera; skipped");
      continue;
    }

    const Ray ray = pixel_ray(camera, pixel);
    const auto hit = intersect_ray_mesh(mesh, ray);

    OcclusionVerdict verdict;
    verdict.point = sample.point;
    if (!hit) {
      verdict.occluding = false;
      verdict.reason = OcclusionReason::NoIntersection;
      result.verdicts.push_back(verdict);
      continue;
    }
    verdict.model_point = hit->point;

    const double point_distance = (sample.point - camera.pose.center).norm();
    const double model_distance = (hit->point - camera.pose.center).norm();
    const bool depth_gap = model_distance - point_distance > options.depth_gap_m;

    const Eigen::Vector3d& mesh_normal = mesh.normals[hit->triangle];
    const double cosine = std::clamp(sample.normal.dot(mesh_normal), -1.0, 1.0);
    const bool normal_disagreement = std::acos(cosine) > angle_threshold_rad;

    verdict.occluding = depth_gap || normal_disagreement;
    if (depth_gap) {
      verdict.reason = OcclusionReason::DepthGap;
    } else if (normal_disagreement) {
      verdict.reason = OcclusionReason::NormalDisagreement;
    } else {
      verdict.reason = OcclusionReason::NoIntersection;
    }
    result.verdicts.push_back(verdict);
  }
  return result;
}

DynamicMaskResult compute_background_and_dynamic_mask(const Image& reference,
                                                      const std::vector<AlignedImage>& aligned,
                                                      double threshold) {
  if (aligned.size() < 2) {
    throw Error(ErrorCode::TooFewImages, "the median background needs at least 2 aligned images");
  }
  const int width = reference.width;
  const int height = reference.height;

  std::vector<Eigen::Matrix3d> to_source(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    to_source[i] = aligned[i].homography_to_reference.inverse();
    if (!to_source[i].allFinite()) {
      throw Error(ErrorCode::DegenerateConfiguration, "homography is not invertible");
    }
  }

  DynamicMaskResult result;
  result.background = Image(width, height);
  result.mask = Mask(width, height);

  std::vector<float> samples;
  samples.reserve(aligned.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Collect the warped samples that land in bounds.
      std::array<std::vector<float>, 3> channels;
      for (std::size_t i = 0; i < aligned.size(); ++i) {
        const Eigen::Vector3d mapped = to_source[i] * Eigen::Vector3d(x, y, 1.0);
        if (std::abs(mapped.z()) < 1e-12) continue;
        const auto value = sample_bilinear(aligned[i].image, mapped.x() / mapped.z(),
                                           mapped.y() / mapped.z());
        if (!value) continue;
        for (int c = 0; c < 3; ++c) channels[c].push_back((*value)[c]);
      }

      float* bg = result.background.pixel(x, y);
      if (channels[0].empty()) {
        // No time-lapse coverage here: fall back to the reference so the
        // difference (and therefore the mask) stays zero.
        const float* ref = reference.pixel(x, y);
        std::copy(ref, ref + 3, bg);
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        auto& v = channels[c];
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        bg[c] = (n % 2 == 1) ? v[n / 2] : 0.5f * (v[n / 2 - 1] + v[n / 2]);
      }
    }
  }

  // Squared per-channel HSV difference, hue wrapped to the shorter arc.
  std::array<std::vector<float>, 3> diff;
  for (auto& channel : diff) channel.resize(width * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float* ref = reference.pixel(x, y);
      const float* bg = result.background.pixel(x, y);
      const Eigen::Vector3f hsv_ref = rgb_to_hsv(ref[0], ref[1], ref[2]);
      const Eigen::Vector3f hsv_bg = rgb_to_hsv(bg[0], bg[1], bg[2]);
      float dh = std::abs(hsv_ref[0] - hsv_bg[0]);
      dh = std::min(dh, 1.0f - dh);
      const float ds = hsv_ref[1] - hsv_bg[1];
      const float dv = hsv_ref[2] - hsv_bg[2];
      const int idx = y * width + x;
      diff[0][idx] = dh * dh;
      diff[1][idx] = ds * ds;
      diff[2][idx] = dv * dv;
    }
  }

  for (auto& channel : diff) {
    channel = gaussian_blur(channel, width, height);
  }

  for (int idx = 0; idx < width * height; ++idx) {
    const bool over = diff[0][idx] > threshold || diff[1][idx] > threshold || diff[2][idx] > threshold;
    result.mask.data[idx] = over ? 1 : 0;
  }
  return result;
}

}  // namespace masfm
