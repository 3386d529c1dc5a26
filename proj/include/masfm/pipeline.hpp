#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "masfm/bundle.hpp"
#include "masfm/camera.hpp"
#include "masfm/geometry.hpp"
#include "masfm/io.hpp"
#include "masfm/mesh.hpp"
#include "masfm/pnp.hpp"

namespace masfm {

// Answers requests for 2D annotations of known mesh points, standing in
// for the interactive user. Returning nullopt declines the request.
class CorrespondenceProvider {
 public:
  virtual ~CorrespondenceProvider() = default;
  virtual std::optional<std::vector<Correspondence2D3D>> annotate(
      const ImageId& image, const std::vector<Eigen::Vector3d>& mesh_points) const = 0;
};

class NullProvider : public CorrespondenceProvider {
 public:
  std::optional<std::vector<Correspondence2D3D>> annotate(
      const ImageId&, const std::vector<Eigen::Vector3d>&) const override {
    return std::nullopt;
  }
};

// Reads <directory>/<image_id>.txt annotation files (`u v X Y Z` lines)
// and serves the requested mesh points, matching them by position.
class DirectoryProvider : public CorrespondenceProvider {
 public:
  explicit DirectoryProvider(std::string directory) : directory_(std::move(directory)) {}
  std::optional<std::vector<Correspondence2D3D>> annotate(
      const ImageId& image, const std::vector<Eigen::Vector3d>& mesh_points) const override;

 private:
  std::string directory_;
};

struct PipelineOptions {
  BundleMode bundle_mode = BundleMode::HardConstrained;
  std::uint64_t seed = 0;
  double default_fov_deg = 50.0;
  int track_match_threshold = 60;
  double min_triangulation_angle_deg = 2.0;
  double homography_gate_fraction = 0.8;
  // RANSAC thresholds as fractions of the image width.
  double fundamental_threshold_factor = 0.005;
  double homography_threshold_factor = 0.01;
  double pnp_threshold_factor = 0.01;
  int ransac_max_iterations = 2000;
  double ransac_confidence = 0.999;
  double anchor_weight = 100.0;
  int min_bundle_observations = 6;
  int bundle_max_iterations = 60;
};

enum class NextImageStrategy { TrackPnP, NeedsAnchor };

struct NextImage {
  ImageId image;
  NextImageStrategy strategy = NextImageStrategy::TrackPnP;
  int track_match_count = 0;
};

struct RegistrationState {
  std::map<ImageId, Camera> registered;
  std::set<ImageId> unregistered;
  std::set<ImageId> anchors;
  std::vector<ImageId> anchor_order;  // registration order
  std::map<ImageId, std::vector<Correspondence2D3D>> anchor_annotations;
  std::vector<Track> track_graph;
  std::vector<std::string> event_log;
  // Set when the provider declined and the pipeline halted.
  std::optional<ImageId> pending_annotation;
};

// Incremental mesh-anchored registration. The pipeline owns one
// RegistrationState; the step methods mirror the stages of the overall
// algorithm and can be driven individually (the tests do) or via run().
class Pipeline {
 public:
  Pipeline(std::vector<ImageInfo> images, std::vector<FeatureMatch> matches,
           const CorrespondenceProvider& provider, PipelineOptions options);

  // Registers an image from explicit 2D-3D correspondences and marks it as
  // an anchor. Distortion stays zero and the focal length comes from
  // fov_deg, then image metadata, then the default field of view.
  void register_anchor(const ImageId& image, const std::vector<Correspondence2D3D>& correspondences,
                       std::optional<Pose> initial_pose = std::nullopt,
                       std::optional<double> fov_deg = std::nullopt);

  // RANSAC fundamental pruning over every image pair, then track building.
  void prune_matches_and_build_tracks();

  // Registers every unregistered image that matches some anchor up to a
  // homography by warping the anchor annotations. Returns the number of
  // images registered.
  int propagate_by_homography();

  NextImage select_next_image() const;

  // TrackPnP: RANSAC PnP on triangulated tracks refined by the
  // epipolar-constrained solve. NeedsAnchor: asks the provider and
  // registers the image as a new anchor (throws ProviderDeclined).
  void register_next(const NextImage& next);

  // Triangulates tracks that newly have two registered observations.
  int triangulate_tracks();

  // One constrained bundle adjustment over all eligible registered
  // cameras; skipped when nothing is triangulated.
  bool run_bundle();

  // Full loop until everything is registered or the provider declines.
  void run();

  const RegistrationState& state() const { return state_; }
  RegistrationState& mutable_state() { return state_; }
  const PipelineOptions& options() const { return options_; }

 private:
  using PairKey = std::pair<ImageId, ImageId>;

  static PairKey make_key(const ImageId& a, const ImageId& b) {
    return a < b ? PairKey{a, b} : PairKey{b, a};
  }

  const ImageInfo& info_for(const ImageId& image) const;
  Intrinsics intrinsics_for(const ImageId& image, std::optional<double> fov_deg) const;
  std::vector<FeatureMatch> matches_between(const ImageId& from, const ImageId& to) const;
  int raw_match_count_to_registered(const ImageId& image) const;
  int triangulated_track_count(const ImageId& image) const;
  void log(const std::string& line);
  void mark_registered(const ImageId& image, const Camera& camera);
  void refresh_anchor_seen();

  std::map<ImageId, ImageInfo> images_;
  std::map<PairKey, std::vector<FeatureMatch>> matches_;
  std::map<PairKey, Eigen::Matrix3d> fundamentals_;
  std::set<PairKey> gate_checked_;  // homography gates already evaluated
  const CorrespondenceProvider& provider_;
  PipelineOptions options_;
  RegistrationState state_;
  bool pruned_ = false;
};

struct PipelineInputs {
  std::vector<ImageInfo> images;
  std::vector<FeatureMatch> matches;
  std::vector<AnchorFile> anchors;
  TriangleMesh mesh;  // carried for reporting; registration uses annotations
};

RegistrationState run_pipeline(const PipelineInputs& inputs, const CorrespondenceProvider& provider,
                               const PipelineOptions& options);

}  // namespace masfm
