#include "masfm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "masfm/error.hpp"
#include "masfm/io.hpp"
#include "masfm/rng.hpp"

namespace masfm {

namespace {

constexpr double kAnnotationMargin = 4.0;  // pixels from the image border

void add_quad(TriangleMesh& mesh, const Eigen::Vector3d& p00, const Eigen::Vector3d& p10,
              const Eigen::Vector3d& p11, const Eigen::Vector3d& p01) {
  const int base = static_cast<int>(mesh.vertices.size());
  mesh.vertices.push_back(p00);
  mesh.vertices.push_back(p10);
  mesh.vertices.push_back(p11);
  mesh.vertices.push_back(p01);
  mesh.triangles.emplace_back(base, base + 1, base + 2);
  mesh.triangles.emplace_back(base, base + 2, base + 3);
}

// Wall as a grid of cells; cells listed in `recessed` are pushed inward by
// `depth` with four connecting side quads, which gives the box its
// building-like relief.
void add_gridded_wall(TriangleMesh& mesh, const Eigen::Vector3d& origin, const Eigen::Vector3d& u_axis,
                      const Eigen::Vector3d& v_axis, const Eigen::Vector3d& outward, int nu, int nv,
                      const std::vector<std::pair<int, int>>& recessed, double depth) {
  const Eigen::Vector3d du = u_axis / nu;
  const Eigen::Vector3d dv = v_axis / nv;
  const Eigen::Vector3d inset = -depth * outward;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const Eigen::Vector3d p00 = origin + static_cast<double>(i) * du + static_cast<double>(j) * dv;
      const Eigen::Vector3d p10 = p00 + du;
      const Eigen::Vector3d p11 = p00 + du + dv;
      const Eigen::Vector3d p01 = p00 + dv;
      const bool is_recessed =
          std::find(recessed.begin(), recessed.end(), std::make_pair(i, j)) != recessed.end();
      if (!is_recessed) {
        add_quad(mesh, p00, p10, p11, p01);
        continue;
      }
      const Eigen::Vector3d q00 = p00 + inset, q10 = p10 + inset, q11 = p11 + inset, q01 = p01 + inset;
      add_quad(mesh, q00, q10, q11, q01);  // recessed pane
      add_quad(mesh, p00, p10, q10, q00);  // sill
      add_quad(mesh, p10, p11, q11, q10);  // jamb
      add_quad(mesh, p11, p01, q01, q11);  // lintel
      add_quad(mesh, p01, p00, q00, q01);  // jamb
    }
  }
}

Pose look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);

  Eigen::Matrix3d rot;
  rot.row(0) = right;
  rot.row(1) = down;
  rot.row(2) = forward;

  Pose pose;
  pose.rotation = Eigen::Quaterniond(rot);
  pose.rotation.normalize();
  pose.center = position;
  return pose;
}

// Candidate annotation locations: box corners, top edge midpoints, and the
// outer corners of every recessed window; the model features a user would
// click on.
std::vector<Eigen::Vector3d> annotation_candidates() {
  const double hx = 10.0, hy = 6.0, top = 8.0;
  std::vector<Eigen::Vector3d> candidates;
  for (double x : {-hx, hx}) {
    for (double y : {-hy, hy}) {
      candidates.emplace_back(x, y, 0.0);
      candidates.emplace_back(x, y, top);
    }
  }
  candidates.emplace_back(0.0, -hy, top);
  candidates.emplace_back(0.0, hy, top);
  candidates.emplace_back(-hx, 0.0, top);
  candidates.emplace_back(hx, 0.0, top);

  const double z0 = top / 3.0, z1 = 2.0 * top / 3.0;
  for (double y : {-hy, hy}) {
    for (double x0 : {-6.0, 2.0}) {
      for (double x : {x0, x0 + 4.0}) {
        candidates.emplace_back(x, y, z0);
        candidates.emplace_back(x, y, z1);
      }
    }
  }
  for (double x : {-hx, hx}) {
    for (double y : {-2.0, 2.0}) {
      candidates.emplace_back(x, y, z0);
      candidates.emplace_back(x, y, z1);
    }
  }
  return candidates;
}

}  // namespace

const char* scene_rig_name(SceneRig rig) {
  switch (rig) {
    case SceneRig::Orbit: return "orbit";
    case SceneRig::TimeLapseCluster: return "timelapse";
    case SceneRig::TwoCluster: return "twocluster";
  }
  return "unknown";
}

TriangleMesh make_building_mesh() {
  TriangleMesh mesh;
  const double hx = 10.0, hy = 6.0, top = 8.0;
  const double depth = 0.6;

  // Long walls (y = +-hy), 5x3 grid with two recessed windows.
  add_gridded_wall(mesh, {-hx, hy, 0.0}, {2.0 * hx, 0.0, 0.0}, {0.0, 0.0, top}, {0.0, 1.0, 0.0}, 5, 3,
                   {{1, 1}, {3, 1}}, depth);
  add_gridded_wall(mesh, {hx, -hy, 0.0}, {-2.0 * hx, 0.0, 0.0}, {0.0, 0.0, top}, {0.0, -1.0, 0.0}, 5,
                   3, {{1, 1}, {3, 1}}, depth);
  // Short walls (x = +-hx), 3x3 grid with one recessed door/window.
  add_gridded_wall(mesh, {hx, hy, 0.0}, {0.0, -2.0 * hy, 0.0}, {0.0, 0.0, top}, {1.0, 0.0, 0.0}, 3, 3,
                   {{1, 1}}, depth);
  add_gridded_wall(mesh, {-hx, -hy, 0.0}, {0.0, 2.0 * hy, 0.0}, {0.0, 0.0, top}, {-1.0, 0.0, 0.0}, 3,
                   3, {{1, 1}}, depth);
  // Roof with one recessed skylight, and a flat floor.
  add_gridded_wall(mesh, {-hx, -hy, top}, {2.0 * hx, 0.0, 0.0}, {0.0, 2.0 * hy, 0.0},
                   {0.0, 0.0, 1.0}, 4, 2, {{2, 1}}, depth);
  add_quad(mesh, {-hx, -hy, 0.0}, {-hx, hy, 0.0}, {hx, hy, 0.0}, {hx, -hy, 0.0});

  mesh.compute_normals();
  return mesh;
}

Pose SyntheticScene::perturbed_pose(int camera, double angle_deg, double center_offset,
                                    std::uint64_t salt) const {
  Rng rng(mix_seed(spec.seed, mix_seed(salt, static_cast<std::uint64_t>(camera))));
  Eigen::Vector3d axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitX();
  axis.normalize();
  Eigen::Vector3d shift(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (shift.norm() < 1e-12) shift = Eigen::Vector3d::UnitY();
  shift = shift.normalized() * center_offset;

  Pose pose = cameras[camera].pose;
  pose.rotation = rotation_increment(axis * angle_deg * M_PI / 180.0) * pose.rotation;
  pose.rotation.normalize();
  pose.center += shift;
  return pose;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  if (spec.camera_count < 2) {
    throw Error(ErrorCode::InvalidSpec, "camera_count must be at least 2");
  }
  if (spec.point_count < 8) {
    throw Error(ErrorCode::InvalidSpec, "point_count must be at least 8");
  }
  if (spec.noise_px < 0.0 || spec.outlier_fraction < 0.0 || spec.outlier_fraction > 1.0) {
    throw Error(ErrorCode::InvalidSpec, "invalid noise or outlier fraction");
  }

  SyntheticScene scene;
  scene.spec = spec;
  scene.mesh = make_building_mesh();

  // Close enough that the building fills most of the 50-degree frame;
  // weak-perspective distances would leave focal length and camera depth
  // nearly interchangeable once intrinsics are refined.
  const Eigen::Vector3d target(0.0, 0.0, 4.0);
  const double radius = 0.9 * scene.mesh.diameter();

  Intrinsics base_intrinsics;
  base_intrinsics.width = spec.image_width;
  base_intrinsics.height = spec.image_height;
  base_intrinsics.focal_px = Intrinsics::focal_from_fov_deg(50.0, spec.image_width);

  Rng camera_rng(mix_seed(spec.seed, fnv1a64("cameras")));

  // Cluster seeds for TwoCluster sit a quarter turn apart so the roof-line
  // annotation points stay visible from both groups.
  const auto cluster_base = [&](double angle) {
    const Eigen::Vector3d position = target + Eigen::Vector3d(radius * std::cos(angle),
                                                              radius * std::sin(angle), 0.4 * radius);
    return look_at(position, target);
  };

  for (int i = 0; i < spec.camera_count; ++i) {
    Camera camera;
    camera.intrinsics = base_intrinsics;
    switch (spec.rig) {
      case SceneRig::Orbit: {
        const double angle = 2.0 * M_PI * i / spec.camera_count;
        const double height = (0.25 + 0.2 * camera_rng.uniform()) * radius;
        const Eigen::Vector3d position =
            target + Eigen::Vector3d(radius * std::cos(angle), radius * std::sin(angle), height);
        camera.pose = look_at(position, target);
        break;
      }
      case SceneRig::TimeLapseCluster: {
        camera.pose = cluster_base(0.0);
        if (i > 0) {
          const Eigen::Vector3d axis(camera_rng.gaussian(), camera_rng.gaussian(), camera_rng.gaussian());
          camera.pose.rotation =
              rotation_increment(axis.normalized() * (2.0 * M_PI / 180.0) * camera_rng.uniform()) *
              camera.pose.rotation;
          camera.pose.rotation.normalize();
          camera.intrinsics.focal_px *= 0.85 + 0.3 * camera_rng.uniform();
        }
        break;
      }
      case SceneRig::TwoCluster: {
        const bool second = i >= (spec.camera_count + 1) / 2;
        camera.pose = cluster_base(second ? M_PI / 2.0 : 0.0);
        const int index_in_cluster = second ? i - (spec.camera_count + 1) / 2 : i;
        if (index_in_cluster > 0) {
          const Eigen::Vector3d axis(camera_rng.gaussian(), camera_rng.gaussian(), camera_rng.gaussian());
          camera.pose.rotation =
              rotation_increment(axis.normalized() * (2.0 * M_PI / 180.0) * camera_rng.uniform()) *
              camera.pose.rotation;
          camera.pose.rotation.normalize();
          camera.intrinsics.focal_px *= 0.85 + 0.3 * camera_rng.uniform();
        }
        break;
      }
    }
    scene.cameras.push_back(camera);

    std::ostringstream id;
    id << "cam" << (i < 10 ? "0" : "") << i;
    scene.image_ids.push_back(id.str());
  }

  // Surface points, area-weighted over the mesh triangles.
  Rng point_rng(mix_seed(spec.seed, fnv1a64("points")));
  std::vector<double> cumulative_area(scene.mesh.triangles.size());
  double total_area = 0.0;
  for (std::size_t t = 0; t < scene.mesh.triangles.size(); ++t) {
    total_area += scene.mesh.triangle_area(static_cast<int>(t));
    cumulative_area[t] = total_area;
  }
  const auto sample_surface_point = [&](Rng& rng) {
    const double pick = rng.uniform() * total_area;
    const std::size_t t = std::lower_bound(cumulative_area.begin(), cumulative_area.end(), pick) -
                          cumulative_area.begin();
    const auto& tri = scene.mesh.triangles[std::min(t, scene.mesh.triangles.size() - 1)];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    return (1.0 - r1) * scene.mesh.vertices[tri[0]] + r1 * (1.0 - r2) * scene.mesh.vertices[tri[1]] +
           r1 * r2 * scene.mesh.vertices[tri[2]];
  };

  Rng noise_rng(mix_seed(spec.seed, fnv1a64("noise")));
  for (int p = 0; p < spec.point_count; ++p) {
    SceneTrack track;
    track.point = sample_surface_point(point_rng);
    for (int c = 0; c < spec.camera_count; ++c) {
      Eigen::Vector2d pixel;
      try {
        pixel = project(scene.cameras[c], track.point);
      } catch (const Error&) {
        continue;
      }
      if (!pixel_in_bounds(scene.cameras[c].intrinsics, pixel, 1.0)) continue;
      SceneObservation obs;
      obs.camera = c;
      obs.pixel = pixel;
      obs.noisy_pixel = pixel + Eigen::Vector2d(noise_rng.gaussian(0.0, spec.noise_px),
                                                noise_rng.gaussian(0.0, spec.noise_px));
      track.observations.push_back(obs);
    }
    scene.tracks.push_back(std::move(track));
  }

  // Pairwise matches from co-observed tracks; TwoCluster pairs never cross
  // the cluster boundary. Planted outliers replace both pixels.
  Rng outlier_rng(mix_seed(spec.seed, fnv1a64("outliers")));
  const int cluster_split = (spec.camera_count + 1) / 2;
  const auto same_cluster = [&](int a, int b) {
    if (spec.rig != SceneRig::TwoCluster) return true;
    return (a < cluster_split) == (b < cluster_split);
  };
  for (int a = 0; a < spec.camera_count; ++a) {
    for (int b = a + 1; b < spec.camera_count; ++b) {
      if (!same_cluster(a, b)) continue;
      for (const auto& track : scene.tracks) {
        const SceneObservation* obs_a = nullptr;
        const SceneObservation* obs_b = nullptr;
        for (const auto& obs : track.observations) {
          if (obs.camera == a) obs_a = &obs;
          if (obs.camera == b) obs_b = &obs;
        }
        if (!obs_a || !obs_b) continue;
        FeatureMatch match;
        match.image_a = scene.image_ids[a];
        match.image_b = scene.image_ids[b];
        if (outlier_rng.uniform() < spec.outlier_fraction) {
          match.pixel_a = {outlier_rng.uniform(0.0, spec.image_width),
                           outlier_rng.uniform(0.0, spec.image_height)};
          match.pixel_b = {outlier_rng.uniform(0.0, spec.image_width),
                           outlier_rng.uniform(0.0, spec.image_height)};
        } else {
          match.pixel_a = obs_a->noisy_pixel;
          match.pixel_b = obs_b->noisy_pixel;
        }
        scene.matches.push_back(match);
      }
    }
  }

  // Exact annotations for every camera that sees the clickable landmarks.
  const auto candidates = annotation_candidates();
  for (int c = 0; c < spec.camera_count; ++c) {
    std::vector<SceneAnnotation> annotations;
    for (const auto& point : candidates) {
      Eigen::Vector2d pixel;
      try {
        pixel = project(scene.cameras[c], point);
      } catch (const Error&) {
        continue;
      }
      if (!pixel_in_bounds(scene.cameras[c].intrinsics, pixel, kAnnotationMargin)) continue;
      annotations.push_back({pixel, point});
    }
    if (annotations.size() >= 4) {
      scene.annotations[c] = std::move(annotations);
    }
  }

  scene.anchor_cameras = {0};

  // Seven spread-out reprojection probes: farthest-point selection from a
  // pool of surface samples.
  Rng eval_rng(mix_seed(spec.seed, fnv1a64("eval")));
  std::vector<Eigen::Vector3d> pool;
  for (int i = 0; i < 50; ++i) pool.push_back(sample_surface_point(eval_rng));
  scene.eval_points.push_back(pool.front());
  while (scene.eval_points.size() < 7) {
    double best_score = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      double nearest = std::numeric_limits<double>::max();
      for (const auto& chosen : scene.eval_points) {
        nearest = std::min(nearest, (pool[i] - chosen).squaredNorm());
      }
      if (nearest > best_score) {
        best_score = nearest;
        best_index = i;
      }
    }
    scene.eval_points.push_back(pool[best_index]);
  }

  return scene;
}

void write_scene(const SyntheticScene& scene, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  fs::create_directories(directory + "/anchors");
  fs::create_directories(directory + "/provider");
  fs::create_directories(directory + "/truth");

  std::vector<ImageInfo> images;
  for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
    ImageInfo info;
    info.id = scene.image_ids[i];
    info.width = scene.cameras[i].intrinsics.width;
    info.height = scene.cameras[i].intrinsics.height;
    info.focal_px = scene.cameras[i].intrinsics.focal_px;
    images.push_back(info);
  }
  save_image_list(images, directory + "/images.txt");
  save_matches(scene.matches, directory + "/matches.txt");
  save_obj(scene.mesh, directory + "/mesh.obj");

  for (int anchor : scene.anchor_cameras) {
    const auto it = scene.annotations.find(anchor);
    if (it == scene.annotations.end()) {
      throw Error(ErrorCode::InvalidSpec,
                  "anchor camera sees fewer than 4 annotation points");
    }
    AnchorFile file;
    file.image_id = scene.image_ids[anchor];
    file.initial_pose = scene.perturbed_pose(anchor, 1.0, 0.01 * scene.mesh.diameter(),
                                             fnv1a64("anchor_init"));
    file.fov_deg = scene.cameras[anchor].intrinsics.fov_deg();
    for (const auto& annotation : it->second) {
      file.correspondences.push_back({annotation.pixel, annotation.point, std::nullopt});
    }
    save_anchor_file(file, directory + "/anchors/" + scene.image_ids[anchor] + ".txt");
  }

  for (const auto& [camera, annotations] : scene.annotations) {
    std::vector<Correspondence2D3D> lines;
    for (const auto& annotation : annotations) {
      lines.push_back({annotation.pixel, annotation.point, std::nullopt});
    }
    save_annotation_lines(lines, directory + "/provider/" + scene.image_ids[camera] + ".txt");
  }

  std::map<ImageId, Camera> cameras;
  for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
    cameras[scene.image_ids[i]] = scene.cameras[i];
  }
  save_cameras_json(cameras, directory + "/truth/cameras.json");

  std::vector<PointRecord> points;
  for (std::size_t t = 0; t < scene.tracks.size(); ++t) {
    points.push_back({static_cast<int>(t), scene.tracks[t].point,
                      static_cast<int>(scene.tracks[t].observations.size())});
  }
  save_points(points, directory + "/truth/points.txt");
  save_point_list(scene.eval_points, directory + "/truth/eval_points.txt");
}

}  // namespace masfm
