"""Model-assisted structure-from-motion toolkit.

Registers photographs to a known 3D mesh via anchored PnP and constrained
bundle adjustment. The heavy lifting lives in the compiled `_core` module;
this package re-exports its public surface.
"""

from ._core import (
    BundleObservation,
    BundleProblem,
    BundleTrack,
    Camera,
    Correspondence2D3D,
    FeatureMatch,
    Intrinsics,
    MasfmError,
    Pose,
    RansacConfig,
    Ray,
    SimilarityTransform,
    __version__,
    apply_homography,
    bundle_adjust,
    compare_cameras,
    distort_normalized,
    epipolar_residual,
    estimate_fundamental,
    estimate_homography,
    estimate_pose_dlt,
    generate_scene,
    homography_gate,
    intersect_ray_mesh,
    load_cameras_json,
    pixel_ray,
    project,
    prune_matches_fundamental,
    run_command,
    sampson_distance,
    save_cameras_json,
    similarity_align,
    solve_pnp,
    solve_pnp_constrained,
    triangulate,
    undistort_normalized,
)

__all__ = [
    "BundleObservation",
    "BundleProblem",
    "BundleTrack",
    "Camera",
    "Correspondence2D3D",
    "FeatureMatch",
    "Intrinsics",
    "MasfmError",
    "Pose",
    "RansacConfig",
    "Ray",
    "SimilarityTransform",
    "__version__",
    "apply_homography",
    "bundle_adjust",
    "compare_cameras",
    "distort_normalized",
    "epipolar_residual",
    "estimate_fundamental",
    "estimate_homography",
    "estimate_pose_dlt",
    "generate_scene",
    "homography_gate",
    "intersect_ray_mesh",
    "load_cameras_json",
    "pixel_ray",
    "project",
    "prune_matches_fundamental",
    "run_command",
    "sampson_distance",
    "save_cameras_json",
    "similarity_align",
    "solve_pnp",
    "solve_pnp_constrained",
    "triangulate",
    "undistort_normalized",
]
