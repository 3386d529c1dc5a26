#include "masfm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "masfm/error.hpp"
#include "masfm/ransac.hpp"
#include "masfm/rng.hpp"

namespace masfm {

namespace {

std::string fmt(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

// Union-find over feature nodes used by the track builder.
struct DisjointSet {
  std::vector<int> parent;

  int add() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::optional<std::vector<Correspondence2D3D>> DirectoryProvider::annotate(
    const ImageId& image, const std::vector<Eigen::Vector3d>& mesh_points) const {
  const std::string path = directory_ + "/" + image + ".txt";
  if (!std::filesystem::exists(path)) return std::nullopt;

  std::vector<Correspondence2D3D> file_annotations = load_annotation_lines(path);
  std::vector<Correspondence2D3D> matched;
  for (const auto& point : mesh_points) {
    for (const auto& annotation : file_annotations) {
      if ((annotation.point - point).norm() < 1e-9) {
        matched.push_back(annotation);
        break;
      }
    }
  }
  if (matched.size() < 4) return std::nullopt;
  return matched;
}

Pipeline::Pipeline(std::vector<ImageInfo> images, std::vector<FeatureMatch> matches,
                   const CorrespondenceProvider& provider, PipelineOptions options)
    : provider_(provider), options_(options) {
  for (const auto& info : images) {
    images_[info.id] = info;
    state_.unregistered.insert(info.id);
  }
  for (auto& match : matches) {
    if (!images_.count(match.image_a) || !images_.count(match.image_b)) {
      throw Error(ErrorCode::IoError, "match references unknown image " + match.image_a + "/" + match.image_b);
    }
    if (match.image_a == match.image_b) continue;
    PairKey key = make_key(match.image_a, match.image_b);
    if (match.image_a != key.first) {
      std::swap(match.image_a, match.image_b);
      std::swap(match.pixel_a, match.pixel_b);
    }
    matches_[key].push_back(match);
  }
}

const ImageInfo& Pipeline::info_for(const ImageId& image) const {
  const auto it = images_.find(image);
  if (it == images_.end()) {
    throw Error(ErrorCode::IoError, "image not in the manifest: " + image);
  }
  return it->second;
}

Intrinsics Pipeline::intrinsics_for(const ImageId& image, std::optional<double> fov_deg) const {
  const ImageInfo& info = info_for(image);
  Intrinsics intrinsics;
  intrinsics.width = info.width;
  intrinsics.height = info.height;
  intrinsics.k1 = 0.0;
  intrinsics.k2 = 0.0;
  if (fov_deg) {
    intrinsics.focal_px = Intrinsics::focal_from_fov_deg(*fov_deg, info.width);
  } else if (info.focal_px) {
    intrinsics.focal_px = *info.focal_px;
  } else {
    intrinsics.focal_px = Intrinsics::focal_from_fov_deg(options_.default_fov_deg, info.width);
  }
  return intrinsics;
}

std::vector<FeatureMatch> Pipeline::matches_between(const ImageId& from, const ImageId& to) const {
  const auto it = matches_.find(make_key(from, to));
  if (it == matches_.end()) return {};
  std::vector<FeatureMatch> oriented = it->second;
  if (from != it->first.first) {
    for (auto& match : oriented) {
      std::swap(match.image_a, match.image_b);
      std::swap(match.pixel_a, match.pixel_b);
    }
  }
  return oriented;
}

int Pipeline::raw_match_count_to_registered(const ImageId& image) const {
  int count = 0;
  for (const auto& [id, camera] : state_.registered) {
    (void)camera;
    const auto it = matches_.find(make_key(image, id));
    if (it != matches_.end()) count += static_cast<int>(it->second.size());
  }
  return count;
}

int Pipeline::triangulated_track_count(const ImageId& image) const {
  int count = 0;
  for (const auto& track : state_.track_graph) {
    if (!track.point) continue;
    if (track.observation_in(image)) ++count;
  }
  return count;
}

void Pipeline::log(const std::string& line) { state_.event_log.push_back(line); }

void Pipeline::mark_registered(const ImageId& image, const Camera& camera) {
  state_.registered[image] = camera;
  state_.unregistered.erase(image);
}

void Pipeline::refresh_anchor_seen() {
  for (auto& track : state_.track_graph) {
    track.anchor_seen = false;
    for (const auto& obs : track.observations) {
      if (state_.anchors.count(obs.image)) {
        track.anchor_seen = true;
        break;
      }
    }
  }
}

void Pipeline::register_anchor(const ImageId& image,
                               const std::vector<Correspondence2D3D>& correspondences,
                               std::optional<Pose> initial_pose, std::optional<double> fov_deg) {
  if (correspondences.size() < 4) {
    throw Error(ErrorCode::TooFewCorrespondences, "anchor registration needs >= 4 correspondences");
  }
  if (!state_.unregistered.count(image)) {
    throw Error(ErrorCode::IoError, "image is not in the unregistered set: " + image);
  }

  const Intrinsics intrinsics = intrinsics_for(image, fov_deg);

  Pose init;
  if (initial_pose) {
    init = *initial_pose;
  } else {
    bool have_init = false;
    if (correspondences.size() >= 6) {
      try {
        init = estimate_pose_dlt(correspondences, intrinsics);
        have_init = true;
      } catch (const Error&) {
      }
    }
    if (!have_init) {
      // Fall back to the best-connected registered camera.
      int best_shared = -1;
      for (const auto& [id, camera] : state_.registered) {
        const auto it = matches_.find(make_key(image, id));
        const int shared = it == matches_.end() ? 0 : static_cast<int>(it->second.size());
        if (shared > best_shared) {
          best_shared = shared;
          init = camera.pose;
          have_init = true;
        }
      }
    }
    if (!have_init) {
      throw Error(ErrorCode::TooFewCorrespondences,
                  "no pose initialization available for anchor " + image);
    }
  }

  const PnpResult solved = solve_pnp(correspondences, intrinsics, init);

  Camera camera;
  camera.intrinsics = intrinsics;
  camera.pose = solved.pose;
  mark_registered(image, camera);
  state_.anchors.insert(image);
  state_.anchor_order.push_back(image);
  state_.anchor_annotations[image] = correspondences;
  refresh_anchor_seen();

  log("anchor registered image=" + image + " correspondences=" +
      std::to_string(correspondences.size()) + " final_cost=" + fmt(solved.report.final_cost));
  if (points_coplanar(correspondences, 1e-9)) {
    log("warning coplanar anchor correspondences image=" + image);
  }
}

void Pipeline::prune_matches_and_build_tracks() {
  if (pruned_) return;
  pruned_ = true;

  for (auto& [key, pair_matches] : matches_) {
    if (pair_matches.size() < 8) {
      log("prune skipped pair=" + key.first + "," + key.second + " matches=" +
          std::to_string(pair_matches.size()));
      continue;
    }
    RansacConfig config;
    config.max_iterations = options_.ransac_max_iterations;
    config.confidence = options_.ransac_confidence;
    config.inlier_threshold = options_.fundamental_threshold_factor * info_for(key.first).width;
    config.seed = mix_seed(options_.seed, fnv1a64("prune:" + key.first + ":" + key.second));
    try {
      FundamentalPruneResult pruned = prune_matches_fundamental(pair_matches, config);
      const std::size_t before = pair_matches.size();
      fundamentals_[key] = pruned.fundamental;
      pair_matches = std::move(pruned.inliers);
      log("pruned pair=" + key.first + "," + key.second + " kept=" +
          std::to_string(pair_matches.size()) + "/" + std::to_string(before));
    } catch (const Error& error) {
      log("prune failed pair=" + key.first + "," + key.second + " dropped (" +
          std::string(error_code_name(error.code())) + ")");
      pair_matches.clear();
    }
  }

  // Merge pairwise matches into tracks (union-find over feature nodes).
  DisjointSet nodes;
  std::map<std::tuple<ImageId, double, double>, int> node_index;
  const auto node_for = [&](const ImageId& image, const Eigen::Vector2d& pixel) {
    const auto key = std::make_tuple(image, pixel.x(), pixel.y());
    auto it = node_index.find(key);
    if (it == node_index.end()) {
      it = node_index.emplace(key, nodes.add()).first;
    }
    return it->second;
  };
  for (const auto& [key, pair_matches] : matches_) {
    (void)key;
    for (const auto& match : pair_matches) {
      nodes.merge(node_for(match.image_a, match.pixel_a), node_for(match.image_b, match.pixel_b));
    }
  }

  std::map<int, std::vector<TrackObservation>> groups;
  for (const auto& [key, index] : node_index) {
    groups[nodes.find(index)].push_back({std::get<0>(key), {std::get<1>(key), std::get<2>(key)}});
  }

  int dropped_conflicts = 0;
  for (auto& [root, observations] : groups) {
    (void)root;
    if (observations.size() < 2) continue;
    std::set<ImageId> seen;
    bool conflict = false;
    for (const auto& obs : observations) {
      if (!seen.insert(obs.image).second) {
        conflict = true;
        break;
      }
    }
    if (conflict) {
      ++dropped_conflicts;
      continue;
    }
    Track track;
    track.observations = std::move(observations);
    state_.track_graph.push_back(std::move(track));
  }
  refresh_anchor_seen();
  log("tracks built count=" + std::to_string(state_.track_graph.size()) + " dropped_conflicts=" +
      std::to_string(dropped_conflicts));
}

int Pipeline::propagate_by_homography() {
  prune_matches_and_build_tracks();

  int registered_count = 0;
  // Snapshot: images registered in this pass do not become warp sources.
  const std::vector<ImageId> anchors(state_.anchor_order);
  const std::vector<ImageId> pending(state_.unregistered.begin(), state_.unregistered.end());

  for (const ImageId& image : pending) {
    if (!state_.unregistered.count(image)) continue;
    for (const ImageId& anchor : anchors) {
      const PairKey key = make_key(image, anchor);
      if (gate_checked_.count(key)) continue;

      const std::vector<FeatureMatch> oriented = matches_between(anchor, image);
      if (oriented.size() < 4) continue;
      gate_checked_.insert(key);

      RansacConfig config;
      config.max_iterations = options_.ransac_max_iterations;
      config.confidence = options_.ransac_confidence;
      config.inlier_threshold = options_.homography_threshold_factor * info_for(anchor).width;
      config.seed = mix_seed(options_.seed, fnv1a64("gate:" + anchor + ":" + image));

      HomographyGateResult gate;
      try {
        gate = homography_gate(oriented, config, options_.homography_gate_fraction);
      } catch (const Error&) {
        continue;
      }
      if (!gate.passes || !gate.homography) {
        log("homography gate failed anchor=" + anchor + " image=" + image + " fraction=" +
            fmt(gate.inlier_fraction));
        continue;
      }

      // Warp the anchor annotations into the candidate image.
      const Intrinsics intrinsics = intrinsics_for(image, std::nullopt);
      std::vector<Correspondence2D3D> transferred;
      for (const auto& annotation : state_.anchor_annotations.at(anchor)) {
        const Eigen::Vector2d warped = apply_homography(*gate.homography, annotation.pixel);
        if (!pixel_in_bounds(intrinsics, warped)) continue;
        transferred.push_back({warped, annotation.point, std::nullopt});
      }
      if (transferred.size() < 4) {
        log("homography transfer too sparse anchor=" + anchor + " image=" + image +
            " transferred=" + std::to_string(transferred.size()));
        continue;
      }

      PnpResult solved;
      try {
        solved = solve_pnp(transferred, intrinsics, state_.registered.at(anchor).pose);
      } catch (const Error& error) {
        log("homography pnp failed image=" + image + " (" +
            std::string(error_code_name(error.code())) + ")");
        continue;
      }

      Camera camera;
      camera.intrinsics = intrinsics;
      camera.pose = solved.pose;
      mark_registered(image, camera);
      ++registered_count;
      log("registered image=" + image + " via=homography anchor=" + anchor + " fraction=" +
          fmt(gate.inlier_fraction) + " transferred=" + std::to_string(transferred.size()));
      break;
    }
  }
  return registered_count;
}

NextImage Pipeline::select_next_image() const {
  if (state_.unregistered.empty()) {
    throw Error(ErrorCode::EmptyUnregisteredSet, "no unregistered images remain");
  }

  // Candidates above the track-match threshold, fewest first.
  std::optional<NextImage> best_candidate;
  std::optional<std::tuple<int, int, ImageId>> best_needy;
  for (const ImageId& image : state_.unregistered) {
    const int track_count = triangulated_track_count(image);
    if (track_count >= options_.track_match_threshold) {
      if (!best_candidate || track_count < best_candidate->track_match_count) {
        best_candidate = NextImage{image, NextImageStrategy::TrackPnP, track_count};
      }
    }
    const std::tuple<int, int, ImageId> key{track_count, raw_match_count_to_registered(image), image};
    if (!best_needy || key < *best_needy) best_needy = key;
  }

  if (best_candidate) return *best_candidate;
  return NextImage{std::get<2>(*best_needy), NextImageStrategy::NeedsAnchor,
                   std::get<0>(*best_needy)};
}

void Pipeline::register_next(const NextImage& next) {
  const ImageId& image = next.image;
  if (!state_.unregistered.count(image)) {
    throw Error(ErrorCode::IoError, "image is not unregistered: " + image);
  }

  if (next.strategy == NextImageStrategy::NeedsAnchor) {
    if (state_.anchor_order.empty()) {
      throw Error(ErrorCode::UnderConstrained, "no anchor annotations available to request");
    }
    std::vector<Eigen::Vector3d> mesh_points;
    for (const auto& corr : state_.anchor_annotations.at(state_.anchor_order.front())) {
      mesh_points.push_back(corr.point);
    }
    const auto supplied = provider_.annotate(image, mesh_points);
    if (!supplied) {
      log("provider declined image=" + image);
      throw Error(ErrorCode::ProviderDeclined, image);
    }
    log("provider annotated image=" + image + " correspondences=" +
        std::to_string(supplied->size()));
    register_anchor(image, *supplied);
    return;
  }

  // TrackPnP path.
  const Intrinsics intrinsics = intrinsics_for(image, std::nullopt);
  std::vector<PixelPointPair> track_correspondences;
  std::vector<int> track_ids;
  for (std::size_t t = 0; t < state_.track_graph.size(); ++t) {
    const Track& track = state_.track_graph[t];
    if (!track.point) continue;
    const TrackObservation* obs = track.observation_in(image);
    if (!obs) continue;
    track_correspondences.push_back({obs->pixel, *track.point});
    track_ids.push_back(static_cast<int>(t));
  }
  if (track_correspondences.size() < 4) {
    throw Error(ErrorCode::TooFewCorrespondences,
                "image " + image + " matches too few triangulated tracks");
  }

  // Initialize from the registered camera sharing the most matches.
  ImageId init_source;
  int best_shared = -1;
  for (const auto& [id, camera] : state_.registered) {
    (void)camera;
    const auto it = matches_.find(make_key(image, id));
    const int shared = it == matches_.end() ? 0 : static_cast<int>(it->second.size());
    if (shared > best_shared) {
      best_shared = shared;
      init_source = id;
    }
  }

  Camera init_camera;
  init_camera.intrinsics = intrinsics;
  init_camera.pose = state_.registered.at(init_source).pose;

  RansacConfig config;
  config.max_iterations = options_.ransac_max_iterations;
  config.confidence = options_.ransac_confidence;
  config.inlier_threshold = options_.pnp_threshold_factor * intrinsics.width;
  config.seed = mix_seed(options_.seed, fnv1a64("pnp:" + image));

  const PnpRansacResult consensus = pnp_ransac(track_correspondences, init_camera, config);

  // Epipolar-constrained refinement against the best-connected anchor.
  ImageId constraint_anchor;
  int anchor_shared = -1;
  for (const ImageId& anchor : state_.anchor_order) {
    const auto it = matches_.find(make_key(image, anchor));
    const int shared = it == matches_.end() ? 0 : static_cast<int>(it->second.size());
    if (shared > anchor_shared) {
      anchor_shared = shared;
      constraint_anchor = anchor;
    }
  }

  Pose final_pose = consensus.pose;
  bool constrained = false;
  if (!constraint_anchor.empty()) {
    const std::vector<FeatureMatch> anchor_matches = matches_between(constraint_anchor, image);
    if (anchor_matches.size() >= 8) {
      Eigen::Matrix3d fundamental;
      const auto stored = fundamentals_.find(make_key(constraint_anchor, image));
      try {
        fundamental = estimate_fundamental(anchor_matches);
      } catch (const Error&) {
        if (stored == fundamentals_.end()) {
          fundamental.setZero();
        } else {
          // Orient the stored matrix as anchor -> image.
          if (make_key(constraint_anchor, image).first == constraint_anchor) {
            fundamental = stored->second;
          } else {
            fundamental = stored->second.transpose();
          }
        }
      }

      if (!fundamental.isZero()) {
        const Camera& anchor_camera = state_.registered.at(constraint_anchor);
        std::vector<Correspondence2D3D> constrained_corrs;
        for (std::size_t i = 0; i < track_correspondences.size(); ++i) {
          const Track& track = state_.track_graph[track_ids[i]];
          Eigen::Vector2d anchor_pixel;
          if (const TrackObservation* obs = track.observation_in(constraint_anchor)) {
            anchor_pixel = obs->pixel;
          } else {
            try {
              anchor_pixel = project(anchor_camera, track_correspondences[i].point);
            } catch (const Error&) {
              continue;
            }
          }
          EpipolarLine line;
          try {
            line = EpipolarLine::from_homogeneous(fundamental * anchor_pixel.homogeneous());
          } catch (const Error&) {
            continue;
          }
          constrained_corrs.push_back(
              {track_correspondences[i].pixel, track_correspondences[i].point, line});
        }
        if (constrained_corrs.size() >= 4) {
          try {
            final_pose = solve_pnp_constrained(constrained_corrs, intrinsics, consensus.pose).pose;
            constrained = true;
          } catch (const Error& error) {
            log("constrained pnp failed image=" + image + " (" +
                std::string(error_code_name(error.code())) + "); keeping ransac pose");
          }
        }
      }
    }
    if (!constrained) {
      log("warning no epipolar constraint for image=" + image + " anchor=" + constraint_anchor);
    }
  }

  Camera camera;
  camera.intrinsics = intrinsics;
  camera.pose = final_pose;
  mark_registered(image, camera);
  log("registered image=" + image + " via=" + (constrained ? "constrained_pnp" : "track_pnp") +
      " inliers=" + std::to_string(consensus.inlier_indices.size()) + "/" +
      std::to_string(track_correspondences.size()) + " anchor=" + constraint_anchor);
}

int Pipeline::triangulate_tracks() {
  int created = 0;
  for (auto& track : state_.track_graph) {
    if (track.point) continue;
    std::vector<std::pair<Camera, Eigen::Vector2d>> observations;
    for (const auto& obs : track.observations) {
      const auto it = state_.registered.find(obs.image);
      if (it != state_.registered.end()) {
        observations.emplace_back(it->second, obs.pixel);
      }
    }
    if (observations.size() < 2) continue;
    try {
      track.point = triangulate(observations, options_.min_triangulation_angle_deg);
      ++created;
    } catch (const Error&) {
      // insufficient parallax or behind a camera; retried on later passes
    }
  }
  if (created > 0) {
    log("triangulated new=" + std::to_string(created));
  }
  return created;
}

bool Pipeline::run_bundle() {
  // Count observations per registered camera over triangulated tracks.
  std::map<ImageId, int> observation_counts;
  for (const auto& track : state_.track_graph) {
    if (!track.point) continue;
    for (const auto& obs : track.observations) {
      if (state_.registered.count(obs.image)) ++observation_counts[obs.image];
    }
  }

  std::vector<ImageId> eligible;
  for (const auto& [id, count] : observation_counts) {
    if (count >= options_.min_bundle_observations) eligible.push_back(id);
  }
  if (eligible.size() < 2) return false;

  std::map<ImageId, int> index_of;
  BundleProblem problem;
  for (const ImageId& id : eligible) {
    index_of[id] = static_cast<int>(problem.cameras.size());
    problem.cameras.push_back(state_.registered.at(id));
  }
  for (const ImageId& id : eligible) {
    if (state_.anchors.count(id)) problem.anchor_indices.push_back(index_of[id]);
  }
  problem.mode = options_.bundle_mode;
  problem.anchor_weight = options_.anchor_weight;
  if (problem.anchor_indices.empty() && problem.mode != BundleMode::Classic) {
    log("warning no eligible anchor; bundle falls back to classic gauge");
    problem.mode = BundleMode::Classic;
  }

  std::vector<int> bundled_tracks;
  for (std::size_t t = 0; t < state_.track_graph.size(); ++t) {
    const Track& track = state_.track_graph[t];
    if (!track.point) continue;
    BundleTrack bundle_track;
    bundle_track.point = *track.point;
    for (const auto& obs : track.observations) {
      const auto it = index_of.find(obs.image);
      if (it != index_of.end()) {
        bundle_track.observations.push_back({it->second, obs.pixel});
      }
    }
    if (bundle_track.observations.size() >= 2) {
      problem.tracks.push_back(std::move(bundle_track));
      bundled_tracks.push_back(static_cast<int>(t));
    }
  }
  if (problem.tracks.empty()) return false;

  // Cameras that lost eligibility through track filtering would make the
  // problem invalid; drop the bundle run in that unlikely case.
  std::vector<int> counts(problem.cameras.size(), 0);
  for (const auto& track : problem.tracks) {
    for (const auto& obs : track.observations) ++counts[obs.camera];
  }
  for (int count : counts) {
    if (count < options_.min_bundle_observations) return false;
  }

  BundleOptions bundle_options;
  bundle_options.lm.max_iterations = options_.bundle_max_iterations;
  BundleResult result;
  try {
    result = bundle_adjust(problem, bundle_options);
  } catch (const Error& error) {
    log("bundle failed (" + std::string(error_code_name(error.code())) + ")");
    return false;
  }

  for (const ImageId& id : eligible) {
    state_.registered[id] = result.cameras[index_of[id]];
  }
  for (std::size_t i = 0; i < bundled_tracks.size(); ++i) {
    state_.track_graph[bundled_tracks[i]].point = result.points[i];
  }
  for (const auto& warning : result.warnings) {
    log("bundle warning: " + warning);
  }
  log("bundle mode=" + std::string(bundle_mode_name(problem.mode)) + " cameras=" +
      std::to_string(problem.cameras.size()) + " tracks=" + std::to_string(problem.tracks.size()) +
      " cost " + fmt(result.report.initial_cost) + " -> " + fmt(result.report.final_cost) +
      " iters=" + std::to_string(result.report.iterations));
  return true;
}

void Pipeline::run() {
  prune_matches_and_build_tracks();

  while (!state_.unregistered.empty()) {
    const int propagated = propagate_by_homography();
    const int triangulated = triangulate_tracks();
    if (propagated > 0 || triangulated > 0) {
      run_bundle();
    }
    if (state_.unregistered.empty()) break;

    const NextImage next = select_next_image();
    log("selected image=" + next.image + " strategy=" +
        (next.strategy == NextImageStrategy::TrackPnP ? "track_pnp" : "needs_anchor") +
        " track_matches=" + std::to_string(next.track_match_count));
    try {
      register_next(next);
    } catch (const Error& error) {
      if (error.code() == ErrorCode::ProviderDeclined) {
        state_.pending_annotation = next.image;
        log("pipeline halted; image " + next.image + " requires annotation");
        return;
      }
      throw;
    }
    triangulate_tracks();
    run_bundle();
  }
  log("pipeline complete registered=" + std::to_string(state_.registered.size()));
}

RegistrationState run_pipeline(const PipelineInputs& inputs, const CorrespondenceProvider& provider,
                               const PipelineOptions& options) {
  if (inputs.anchors.empty()) {
    throw Error(ErrorCode::UnderConstrained, "at least one anchor annotation file is required");
  }

  Pipeline pipeline(inputs.images, inputs.matches, provider, options);
  std::vector<AnchorFile> anchors = inputs.anchors;
  std::sort(anchors.begin(), anchors.end(),
            [](const AnchorFile& a, const AnchorFile& b) { return a.image_id < b.image_id; });

  // Annotations are clicks on the model; flag any that sit off the mesh.
  const double off_mesh_tolerance = 0.01 * inputs.mesh.diameter();
  for (const auto& anchor : anchors) {
    for (const auto& corr : anchor.correspondences) {
      if (!inputs.mesh.triangles.empty() &&
          distance_to_mesh(inputs.mesh, corr.point) > off_mesh_tolerance) {
        pipeline.mutable_state().event_log.push_back(
            "warning anchor point off mesh image=" + anchor.image_id + " point=" +
            std::to_string(corr.point.x()) + "," + std::to_string(corr.point.y()) + "," +
            std::to_string(corr.point.z()));
      }
    }
  }

  for (const auto& anchor : anchors) {
    pipeline.register_anchor(anchor.image_id, anchor.correspondences, anchor.initial_pose,
                             anchor.fov_deg);
  }
  pipeline.run();
  return pipeline.state();
}

}  // namespace masfm
