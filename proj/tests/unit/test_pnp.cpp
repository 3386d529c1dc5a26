#include <doctest.h>

#include "masfm/error.hpp"
#include "masfm/pnp.hpp"
#include "masfm/rng.hpp"
#include "test_support.hpp"

using namespace masfm;
using test::thrown_code;

namespace {

struct PnpScene {
  Camera camera;  // ground truth
  std::vector<Correspondence2D3D> correspondences;
};

PnpScene make_pnp_scene(Rng& rng, int count, bool with_lines = false) {
  PnpScene scene;
  scene.camera = test::basic_camera(600.0);
  scene.camera.pose = test::look_at_pose({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 0)},
                                         {0.0, 0.0, 10.0});

  // Anchor view that induces the epipolar lines.
  Camera anchor = test::basic_camera(600.0);
  anchor.pose = test::look_at_pose({3.0, 1.0, -1.0}, {0.0, 0.0, 10.0});

  while (static_cast<int>(scene.correspondences.size()) < count) {
    const Eigen::Vector3d point(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(8, 14));
    Eigen::Vector2d pixel, anchor_pixel;
    try {
      pixel = project(scene.camera, point);
      anchor_pixel = project(anchor, point);
    } catch (const Error&) {
      continue;
    }
    if (!pixel_in_bounds(scene.camera.intrinsics, pixel)) continue;

    Correspondence2D3D corr;
    corr.pixel = pixel;
    corr.point = point;
    if (with_lines) {
      // Exact epipolar line: the projection of the anchor ray through this
      // point into the solved camera. Build it from two points on the ray.
      const Eigen::Vector3d dir = (point - anchor.pose.center).normalized();
      const Eigen::Vector2d p1 = project(scene.camera, anchor.pose.center + 6.0 * dir);
      const Eigen::Vector2d p2 = project(scene.camera, anchor.pose.center + 20.0 * dir);
      const Eigen::Vector3d line = p1.homogeneous().cross(p2.homogeneous());
      corr.epipolar_line = EpipolarLine::from_homogeneous(line);
    }
    scene.correspondences.push_back(corr);
  }
  return scene;
}

}  // namespace

TEST_CASE("solve_pnp: recovers a perturbed pose from exact correspondences") {
  Rng rng(131);
  for (int trial = 0; trial < 10; ++trial) {
    const PnpScene scene = make_pnp_scene(rng, 12);
    const Pose init = test::perturb_pose(scene.camera.pose, rng, 5.0, 0.2);
    const PnpResult result = solve_pnp(scene.correspondences, scene.camera.intrinsics, init);
    CHECK(test::rotation_error_deg(result.pose.rotation, scene.camera.pose.rotation) < 1e-6 * 180.0 / M_PI);
    CHECK((result.pose.center - scene.camera.pose.center).norm() < 1e-6);
  }
}

TEST_CASE("solve_pnp: starting at the truth accepts no steps") {
  Rng rng(137);
  const PnpScene scene = make_pnp_scene(rng, 10);
  const PnpResult result = solve_pnp(scene.correspondences, scene.camera.intrinsics, scene.camera.pose);
  CHECK(result.report.step_costs.empty());
  CHECK(result.report.termination == Termination::GradientTolerance);
  CHECK(test::rotation_error_deg(result.pose.rotation, scene.camera.pose.rotation) == doctest::Approx(0.0));
}

TEST_CASE("solve_pnp: fewer than 4 correspondences is an error") {
  Rng rng(139);
  PnpScene scene = make_pnp_scene(rng, 3);
  CHECK(thrown_code([&] {
          solve_pnp(scene.correspondences, scene.camera.intrinsics, scene.camera.pose);
        }) == ErrorCode::TooFewCorrespondences);
}

TEST_CASE("solve_pnp: noiseless reprojection after solving is within 1e-6 px") {
  Rng rng(149);
  const PnpScene scene = make_pnp_scene(rng, 15);
  const Pose init = test::perturb_pose(scene.camera.pose, rng, 4.0, 0.2);
  const PnpResult result = solve_pnp(scene.correspondences, scene.camera.intrinsics, init);
  Camera solved{scene.camera.intrinsics, result.pose};
  for (const auto& corr : scene.correspondences) {
    CHECK((project(solved, corr.point) - corr.pixel).norm() < 1e-6);
  }
}

TEST_CASE("solve_pnp: equivariant under rigid world transforms") {
  Rng rng(151);
  const PnpScene scene = make_pnp_scene(rng, 12);
  const Pose init = test::perturb_pose(scene.camera.pose, rng, 3.0, 0.15);

  const Eigen::Quaterniond rotation = rotation_increment({0.4, -0.2, 0.7});
  const Eigen::Vector3d translation(5.0, 2.0, -3.0);

  std::vector<Correspondence2D3D> moved = scene.correspondences;
  for (auto& corr : moved) corr.point = rotation * corr.point + translation;
  Pose moved_init = init;
  moved_init.center = rotation * init.center + translation;
  moved_init.rotation = init.rotation * rotation.conjugate();

  const Pose base = solve_pnp(scene.correspondences, scene.camera.intrinsics, init).pose;
  const Pose transformed = solve_pnp(moved, scene.camera.intrinsics, moved_init).pose;

  CHECK((transformed.center - (rotation * base.center + translation)).norm() < 1e-9);
  const Eigen::Quaterniond expected = base.rotation * rotation.conjugate();
  CHECK(test::rotation_error_deg(transformed.rotation, expected) < 1e-9);
}

TEST_CASE("solve_pnp_constrained: both terms vanish at the truth") {
  Rng rng(157);
  const PnpScene scene = make_pnp_scene(rng, 12, /*with_lines=*/true);
  const Pose init = test::perturb_pose(scene.camera.pose, rng, 4.0, 0.2);
  const PnpResult result =
      solve_pnp_constrained(scene.correspondences, scene.camera.intrinsics, init);
  CHECK(test::rotation_error_deg(result.pose.rotation, scene.camera.pose.rotation) < 1e-5);
  CHECK((result.pose.center - scene.camera.pose.center).norm() < 1e-6);
}

TEST_CASE("solve_pnp_constrained: missing lines are an error") {
  Rng rng(163);
  PnpScene scene = make_pnp_scene(rng, 8, /*with_lines=*/true);
  scene.correspondences[3].epipolar_line.reset();
  CHECK(thrown_code([&] {
          solve_pnp_constrained(scene.correspondences, scene.camera.intrinsics, scene.camera.pose);
        }) == ErrorCode::MissingEpipolarLine);
}

TEST_CASE("solve_pnp_constrained: corrupted pixels hurt less than unconstrained") {
  // 10 exact + 2 corrupted correspondences with exact lines; the robust
  // constrained objective should not do worse than plain least squares.
  int constrained_wins = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(2000 + seed);
    PnpScene scene = make_pnp_scene(rng, 12, /*with_lines=*/true);
    for (int i = 0; i < 2; ++i) {
      scene.correspondences[i].pixel += Eigen::Vector2d(rng.uniform(-1.0, 1.0) > 0 ? 20.0 : -20.0,
                                                        rng.uniform(-1.0, 1.0) > 0 ? 20.0 : -20.0);
    }
    const Pose init = test::perturb_pose(scene.camera.pose, rng, 3.0, 0.2);
    const Pose plain = solve_pnp(scene.correspondences, scene.camera.intrinsics, init).pose;
    const Pose constrained =
        solve_pnp_constrained(scene.correspondences, scene.camera.intrinsics, init).pose;
    const double err_plain = test::rotation_error_deg(plain.rotation, scene.camera.pose.rotation);
    const double err_constrained =
        test::rotation_error_deg(constrained.rotation, scene.camera.pose.rotation);
    if (err_constrained <= err_plain + 1e-9) ++constrained_wins;
  }
  CHECK(constrained_wins >= 22);  // >= 90% of seeds
}

TEST_CASE("solve_pnp_constrained: exact lines never worsen noiseless reprojection") {
  Rng rng(167);
  const PnpScene scene = make_pnp_scene(rng, 12, /*with_lines=*/true);
  const Pose init = test::perturb_pose(scene.camera.pose, rng, 3.0, 0.15);
  const Pose plain = solve_pnp(scene.correspondences, scene.camera.intrinsics, init).pose;
  const Pose constrained =
      solve_pnp_constrained(scene.correspondences, scene.camera.intrinsics, init).pose;

  const auto rmse = [&](const Pose& pose) {
    Camera camera{scene.camera.intrinsics, pose};
    double sum = 0.0;
    for (const auto& corr : scene.correspondences) {
      sum += (project(camera, corr.point) - corr.pixel).squaredNorm();
    }
    return std::sqrt(sum / scene.correspondences.size());
  };
  CHECK(rmse(constrained) <= rmse(plain) + 1e-6);
}

TEST_CASE("pnp jacobians match finite differences at random feasible points") {
  Rng rng(173);
  for (int trial = 0; trial < 100; ++trial) {
    const bool constrained = trial % 2 == 1;
    PnpScene scene = make_pnp_scene(rng, 8, /*with_lines=*/true);
    const Pose at = test::perturb_pose(scene.camera.pose, rng, 2.0, 0.1);
    const auto problem =
        make_pnp_problem(scene.correspondences, scene.camera.intrinsics, constrained);
    const auto check = test::check_jacobian(*problem, pack_pose_parameters(at));
    CHECK(check.ok);
  }
}

TEST_CASE("estimate_pose_dlt: exact recovery from six non-coplanar points") {
  Rng rng(179);
  for (int trial = 0; trial < 10; ++trial) {
    PnpScene scene = make_pnp_scene(rng, 8);
    const Pose pose = estimate_pose_dlt(scene.correspondences, scene.camera.intrinsics);
    CHECK(test::rotation_error_deg(pose.rotation, scene.camera.pose.rotation) < 1e-6);
    CHECK((pose.center - scene.camera.pose.center).norm() < 1e-6);
  }
}

TEST_CASE("points_coplanar: detects planar and accepts generic sets") {
  std::vector<Correspondence2D3D> planar, generic;
  Rng rng(181);
  for (int i = 0; i < 8; ++i) {
    planar.push_back({{0, 0}, {rng.uniform(-3, 3), rng.uniform(-3, 3), 5.0}, std::nullopt});
    generic.push_back(
        {{0, 0}, {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(4, 9)}, std::nullopt});
  }
  CHECK(points_coplanar(planar));
  CHECK_FALSE(points_coplanar(generic));
}
