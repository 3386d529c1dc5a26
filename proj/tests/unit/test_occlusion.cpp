#include <doctest.h>

#include "masfm/error.hpp"
#include "masfm/occlusion.hpp"
#include "masfm/rng.hpp"
#include "masfm/synth.hpp"
#include "test_support.hpp"

using namespace masfm;
using test::thrown_code;

namespace {

// A single wall at z = 10 facing the camera at the origin.
TriangleMesh wall_mesh() {
  TriangleMesh mesh;
  mesh.vertices = {{-10, -10, 10}, {10, -10, 10}, {10, 10, 10}, {-10, 10, 10}};
  mesh.triangles = {{0, 2, 1}, {0, 3, 2}};  // normal toward -z (the camera)
  mesh.compute_normals();
  return mesh;
}

Camera wall_camera() {
  Camera camera = test::basic_camera(500.0);
  return camera;  // identity pose at the origin looking +z
}

Image constant_image(int w, int h, float r, float g, float b) {
  Image image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* p = image.pixel(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
  return image;
}

}  // namespace

TEST_CASE("static occlusion: 0.5 m in front of the wall is a depth-gap occluder") {
  const TriangleMesh mesh = wall_mesh();
  const Eigen::Vector3d wall_normal = mesh.normals[0];
  std::vector<OrientedPoint> cloud = {{{1.0, 2.0, 9.5}, wall_normal}};
  const auto result = classify_static_occlusions(cloud, mesh, wall_camera());
  REQUIRE(result.verdicts.size() == 1);
  CHECK(result.verdicts[0].occluding);
  CHECK(result.verdicts[0].reason == OcclusionReason::DepthGap);
  REQUIRE(result.verdicts[0].model_point.has_value());
  CHECK(std::abs(result.verdicts[0].model_point->z() - 10.0) < 1e-9);
}

TEST_CASE("static occlusion: 0.1 m in front is within tolerance") {
  const TriangleMesh mesh = wall_mesh();
  std::vector<OrientedPoint> cloud = {{{-2.0, 1.0, 9.9}, mesh.normals[0]}};
  const auto result = classify_static_occlusions(cloud, mesh, wall_camera());
  REQUIRE(result.verdicts.size() == 1);
  CHECK_FALSE(result.verdicts[0].occluding);
}

TEST_CASE("static occlusion: surface point with a 45-degree normal disagrees") {
  const TriangleMesh mesh = wall_mesh();
  const Eigen::Vector3d tilted =
      (rotation_increment({0.0, M_PI / 4.0, 0.0}) * mesh.normals[0]).normalized();
  std::vector<OrientedPoint> cloud = {{{0.5, -0.5, 10.0 - 1e-7}, tilted}};
  const auto result = classify_static_occlusions(cloud, mesh, wall_camera());
  REQUIRE(result.verdicts.size() == 1);
  CHECK(result.verdicts[0].occluding);
  CHECK(result.verdicts[0].reason == OcclusionReason::NormalDisagreement);
}

TEST_CASE("static occlusion: rays missing the mesh are non-occluding") {
  const TriangleMesh mesh = wall_mesh();
  Camera camera = wall_camera();
  std::vector<OrientedPoint> cloud = {{{30.0, 0.0, 9.0}, {0, 0, -1}}};  // projects off the wall
  const auto result = classify_static_occlusions(cloud, mesh, camera);
  REQUIRE(result.verdicts.size() == 1);
  CHECK_FALSE(result.verdicts[0].occluding);
  CHECK(result.verdicts[0].reason == OcclusionReason::NoIntersection);
  CHECK_FALSE(result.verdicts[0].model_point.has_value());
}

TEST_CASE("static occlusion: points behind the camera are skipped with a warning") {
  const TriangleMesh mesh = wall_mesh();
  std::vector<OrientedPoint> cloud = {{{0.0, 0.0, -5.0}, {0, 0, -1}},
                                      {{0.0, 0.0, 9.5}, mesh.normals[0]}};
  const auto result = classify_static_occlusions(cloud, mesh, wall_camera());
  CHECK(result.verdicts.size() == 1);
  CHECK(result.warnings.size() == 1);
}

TEST_CASE("static occlusion: exact agreement with a direct oracle on random scenes") {
  const TriangleMesh building = make_building_mesh();
  Rng rng(271);
  int classified = 0;
  int occluded_seen = 0;
  while (classified < 1000) {
    Camera camera = test::basic_camera(500.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    camera.pose = test::look_at_pose(
        {30.0 * std::cos(angle), 30.0 * std::sin(angle), rng.uniform(5.0, 20.0)}, {0, 0, 4});

    std::vector<OrientedPoint> cloud;
    for (int i = 0; i < 20; ++i) {
      OrientedPoint sample;
      sample.point = {rng.uniform(-14, 14), rng.uniform(-10, 10), rng.uniform(-1, 10)};
      Eigen::Vector3d normal(rng.gaussian(), rng.gaussian(), rng.gaussian());
      if (normal.norm() < 1e-9) normal = Eigen::Vector3d::UnitX();
      sample.normal = normal.normalized();
      cloud.push_back(sample);
    }

    const auto result = classify_static_occlusions(cloud, building, camera);

    // Direct reimplementation of the two-term heuristic on oracle hits.
    for (const auto& verdict : result.verdicts) {
      Eigen::Vector2d pixel;
      try {
        pixel = project(camera, verdict.point);
      } catch (const Error&) {
        continue;
      }
      const Ray ray = pixel_ray(camera, pixel);
      const auto hit = intersect_ray_mesh(building, ray);
      bool expected = false;
      if (hit) {
        const double gap = (hit->point - camera.pose.center).norm() -
                           (verdict.point - camera.pose.center).norm();
        const OrientedPoint* sample = nullptr;
        for (const auto& s : cloud) {
          if (s.point == verdict.point) sample = &s;
        }
        REQUIRE(sample != nullptr);
        const double cosine =
            std::clamp(sample->normal.dot(building.normals[hit->triangle]), -1.0, 1.0);
        expected = gap > 0.3 || std::acos(cosine) > M_PI / 6.0;
      }
      CHECK(verdict.occluding == expected);
      if (expected) ++occluded_seen;
      ++classified;
    }
  }
  CHECK(occluded_seen > 100);  // the harness exercises both outcomes
}

TEST_CASE("dynamic mask: identical images give a zero mask and the reference background") {
  const Image reference = constant_image(32, 24, 0.3f, 0.5f, 0.7f);
  std::vector<AlignedImage> aligned(3);
  for (auto& a : aligned) a.image = reference;
  const auto result = compute_background_and_dynamic_mask(reference, aligned);
  for (unsigned char m : result.mask.data) CHECK(m == 0);
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    CHECK(result.background.data[i] == doctest::Approx(reference.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("dynamic mask: painted occluder is recovered at the 0.05 threshold") {
  // Canvas kept large relative to the occluder: the Gaussian smoothing
  // bleeds the difference about one pixel past the boundary.
  const int w = 240, h = 180;
  Image background = constant_image(w, h, 0.25f, 0.55f, 0.35f);
  // Mild texture so the median is not degenerate.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      background.pixel(x, y)[0] += 0.05f * ((x + y) % 3);
    }
  }

  Image reference = background;
  const int x0 = 90, y0 = 66, x1 = 150, y1 = 114;  // painted "vehicle"
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      float* p = reference.pixel(x, y);
      p[0] = 0.95f;
      p[1] = 0.1f;
      p[2] = 0.1f;
    }
  }

  std::vector<AlignedImage> aligned(4);
  for (auto& a : aligned) a.image = background;

  const auto result = compute_background_and_dynamic_mask(reference, aligned, 0.05);

  int inside_hits = 0, inside_total = 0, outside_hits = 0, outside_total = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool inside = x >= x0 && x < x1 && y >= y0 && y < y1;
      if (inside) {
        ++inside_total;
        inside_hits += result.mask.at(x, y);
      } else {
        ++outside_total;
        outside_hits += result.mask.at(x, y);
      }
    }
  }
  CHECK(static_cast<double>(inside_hits) / inside_total >= 0.95);
  CHECK(static_cast<double>(outside_hits) / outside_total <= 0.01);
}

TEST_CASE("dynamic mask: fewer than two aligned images is an error") {
  const Image reference = constant_image(8, 8, 0.5f, 0.5f, 0.5f);
  std::vector<AlignedImage> one(1);
  one[0].image = reference;
  CHECK(thrown_code([&] { compute_background_and_dynamic_mask(reference, one); }) ==
        ErrorCode::TooFewImages);
}

TEST_CASE("dynamic mask: homography warping excludes out-of-bounds samples") {
  const int w = 40, h = 30;
  const Image reference = constant_image(w, h, 0.2f, 0.4f, 0.6f);
  // Aligned images shifted by 5 px: homography maps image -> reference.
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = -5.0;
  std::vector<AlignedImage> aligned(2);
  for (auto& a : aligned) {
    a.image = constant_image(w, h, 0.2f, 0.4f, 0.6f);
    a.homography_to_reference = shift;
  }
  const auto result = compute_background_and_dynamic_mask(reference, aligned);
  for (unsigned char m : result.mask.data) CHECK(m == 0);
}
