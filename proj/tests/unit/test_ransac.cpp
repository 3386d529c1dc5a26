#include <doctest.h>

#include <set>

#include "masfm/error.hpp"
#include "masfm/ransac.hpp"
#include "masfm/rng.hpp"
#include "test_support.hpp"

using namespace masfm;
using test::thrown_code;

namespace {

RansacConfig config_with(double threshold, std::uint64_t seed) {
  RansacConfig config;
  config.inlier_threshold = threshold;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("prune_matches_fundamental: noiseless matches are all inliers") {
  Rng rng(79);
  const auto scene = test::make_two_view_scene(rng, 100);
  const auto result = prune_matches_fundamental(scene.matches, config_with(1.0, 5));
  CHECK(result.inliers.size() == 100);
}

TEST_CASE("prune_matches_fundamental: planted outliers recovered at 95% precision/recall") {
  double precision_sum = 0.0;
  double recall_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const auto scene = test::make_two_view_scene(rng, 60);
    std::vector<FeatureMatch> matches = scene.matches;
    std::set<int> outliers;
    for (int i = 0; i < 40; ++i) {
      FeatureMatch junk;
      junk.image_a = "a";
      junk.image_b = "b";
      junk.pixel_a = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
      junk.pixel_b = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
      outliers.insert(static_cast<int>(matches.size()));
      matches.push_back(junk);
    }

    const auto result = prune_matches_fundamental(matches, config_with(1.0, seed));
    int true_positive = 0, false_positive = 0;
    for (int index : result.inlier_indices) {
      if (outliers.count(index)) {
        ++false_positive;
      } else {
        ++true_positive;
      }
    }
    const int reported = true_positive + false_positive;
    precision_sum += reported > 0 ? static_cast<double>(true_positive) / reported : 0.0;
    recall_sum += true_positive / 60.0;
  }
  CHECK(precision_sum / 100.0 >= 0.95);
  CHECK(recall_sum / 100.0 >= 0.95);
}

TEST_CASE("prune_matches_fundamental: fewer than 8 matches is an error") {
  Rng rng(83);
  auto scene = test::make_two_view_scene(rng, 7);
  CHECK(thrown_code([&] { prune_matches_fundamental(scene.matches, config_with(1.0, 0)); }) ==
        ErrorCode::TooFewMatches);
}

TEST_CASE("ransac: inlier sets are consistent with the reported model") {
  Rng rng(89);
  const auto scene = test::make_two_view_scene(rng, 50);
  std::vector<FeatureMatch> matches = scene.matches;
  for (int i = 0; i < 20; ++i) {
    matches.push_back({"a", "b",
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)},
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)}});
  }
  const auto config = config_with(1.0, 77);
  const auto result = prune_matches_fundamental(matches, config);
  std::set<int> inliers(result.inlier_indices.begin(), result.inlier_indices.end());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double d = sampson_distance(result.fundamental, matches[i].pixel_a, matches[i].pixel_b);
    if (inliers.count(static_cast<int>(i))) {
      CHECK(d < config.inlier_threshold);
    } else {
      CHECK(d >= config.inlier_threshold);
    }
  }
}

TEST_CASE("ransac: deterministic for a fixed seed") {
  Rng rng(97);
  const auto scene = test::make_two_view_scene(rng, 40);
  std::vector<FeatureMatch> matches = scene.matches;
  for (int i = 0; i < 20; ++i) {
    matches.push_back({"a", "b",
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)},
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)}});
  }
  const auto r1 = prune_matches_fundamental(matches, config_with(1.0, 123));
  const auto r2 = prune_matches_fundamental(matches, config_with(1.0, 123));
  CHECK(r1.inlier_indices == r2.inlier_indices);
  CHECK((r1.fundamental - r2.fundamental).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r1.trials_used == r2.trials_used);
}

TEST_CASE("ransac: early termination matches the exhaustive prefix") {
  Rng rng(101);
  const auto scene = test::make_two_view_scene(rng, 40);
  std::vector<FeatureMatch> matches = scene.matches;
  for (int i = 0; i < 15; ++i) {
    matches.push_back({"a", "b",
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)},
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)}});
  }
  auto early_config = config_with(1.0, 31);
  const auto early = prune_matches_fundamental(matches, early_config);
  CHECK(early.trials_used < early_config.max_iterations);

  auto prefix_config = early_config;
  prefix_config.confidence = 1.0;  // disable early termination
  prefix_config.max_iterations = early.trials_used;
  const auto prefix = prune_matches_fundamental(matches, prefix_config);
  CHECK(early.inlier_indices == prefix.inlier_indices);
  CHECK((early.fundamental - prefix.fundamental).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("homography_gate: rotation-only pair passes with all inliers") {
  Camera base = test::basic_camera(500.0);
  Camera rotated = base;
  rotated.intrinsics.focal_px = 560.0;
  rotated.pose.rotation = rotation_increment({0.02, -0.04, 0.01});

  Rng rng(103);
  std::vector<FeatureMatch> matches;
  while (matches.size() < 40) {
    const Eigen::Vector3d point(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(8, 14));
    try {
      const Eigen::Vector2d pa = project(base, point);
      const Eigen::Vector2d pb = project(rotated, point);
      if (pixel_in_bounds(base.intrinsics, pa) && pixel_in_bounds(rotated.intrinsics, pb)) {
        matches.push_back({"a", "b", pa, pb});
      }
    } catch (const Error&) {
    }
  }
  const auto result = homography_gate(matches, config_with(6.4, 9));
  CHECK(result.passes);
  CHECK(result.inlier_fraction == doctest::Approx(1.0));
  CHECK(result.homography.has_value());
}

TEST_CASE("homography_gate: 70% planar inliers fail the 80% gate") {
  Rng rng(107);
  Eigen::Matrix3d truth;
  truth << 1.05, 0.01, 6.0, -0.02, 0.98, -3.0, 1e-5, -1e-5, 1.0;
  std::vector<FeatureMatch> matches;
  for (int i = 0; i < 70; ++i) {
    const Eigen::Vector2d p(rng.uniform(0, 640), rng.uniform(0, 480));
    matches.push_back({"a", "b", p, apply_homography(truth, p)});
  }
  for (int i = 0; i < 30; ++i) {
    matches.push_back({"a", "b",
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)},
                       {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)}});
  }
  const auto result = homography_gate(matches, config_with(6.4, 5));
  CHECK_FALSE(result.passes);
  CHECK(result.inlier_fraction < 0.8);
}

TEST_CASE("homography_gate: wide-baseline non-planar pair fails") {
  Rng rng(109);
  const auto scene = test::make_two_view_scene(rng, 60, 4.0);
  const auto result = homography_gate(scene.matches, config_with(6.4, 3));
  CHECK_FALSE(result.passes);
}

TEST_CASE("homography_gate: fewer than 4 matches is an error") {
  std::vector<FeatureMatch> matches(3, FeatureMatch{"a", "b", {0, 0}, {1, 1}});
  CHECK(thrown_code([&] { homography_gate(matches, config_with(6.4, 0)); }) ==
        ErrorCode::TooFewMatches);
}

TEST_CASE("pnp_ransac: exact correspondences recover the pose with all inliers") {
  Rng rng(113);
  Camera truth = test::basic_camera(600.0);
  truth.pose = test::look_at_pose({1.0, -2.0, -1.0}, {0.0, 0.0, 10.0});

  std::vector<PixelPointPair> correspondences;
  while (correspondences.size() < 20) {
    const Eigen::Vector3d point(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(8, 14));
    try {
      const Eigen::Vector2d pixel = project(truth, point);
      if (pixel_in_bounds(truth.intrinsics, pixel)) correspondences.push_back({pixel, point});
    } catch (const Error&) {
    }
  }

  Camera init = truth;
  init.pose = test::perturb_pose(truth.pose, rng, 4.0, 0.3);
  RansacConfig config;  // default threshold = 1% width
  config.inlier_threshold = 0.0;
  config.seed = 15;
  const auto result = pnp_ransac(correspondences, init, config);
  CHECK(result.inlier_indices.size() == 20);
  CHECK(test::rotation_error_deg(result.pose.rotation, truth.pose.rotation) < 1e-6);
  CHECK((result.pose.center - truth.pose.center).norm() < 1e-6);
}

TEST_CASE("pnp_ransac: corrupted pixels are excluded at the 1% width threshold") {
  Rng rng(127);
  Camera truth = test::basic_camera(600.0);
  truth.pose = test::look_at_pose({0.5, 1.0, -2.0}, {0.0, 0.0, 10.0});

  std::vector<PixelPointPair> correspondences;
  while (correspondences.size() < 16) {
    const Eigen::Vector3d point(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(8, 14));
    try {
      const Eigen::Vector2d pixel = project(truth, point);
      if (pixel_in_bounds(truth.intrinsics, pixel)) correspondences.push_back({pixel, point});
    } catch (const Error&) {
    }
  }
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d point(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(8, 14));
    try {
      Eigen::Vector2d pixel = project(truth, point);
      pixel += Eigen::Vector2d(50.0, 0.0);
      correspondences.push_back({pixel, point});
    } catch (const Error&) {
      --i;
    }
  }

  Camera init = truth;
  init.pose = test::perturb_pose(truth.pose, rng, 3.0, 0.2);
  RansacConfig config;
  config.inlier_threshold = 0.0;  // default 6.4 px for width 640
  config.seed = 99;
  const auto result = pnp_ransac(correspondences, init, config);
  CHECK(result.inlier_indices.size() == 16);
  for (int index : result.inlier_indices) CHECK(index < 16);
}

TEST_CASE("pnp_ransac: fewer than 4 correspondences is an error") {
  std::vector<PixelPointPair> correspondences(3, PixelPointPair{{0, 0}, {0, 0, 5}});
  CHECK(thrown_code([&] { pnp_ransac(correspondences, test::basic_camera(), {}); }) ==
        ErrorCode::TooFewCorrespondences);
}
