#include "masfm/ransac.hpp"

#include <cmath>

#include "masfm/error.hpp"
#include "masfm/pnp.hpp"
#include "masfm/rng.hpp"

namespace masfm {

namespace {

// Trials needed for the requested confidence given the best inlier ratio.
int required_trials(double confidence, double inlier_ratio, int sample_size, int max_iterations) {
  if (confidence >= 1.0) return max_iterations;
  if (inlier_ratio <= 0.0) return max_iterations;
  if (inlier_ratio >= 1.0) return 1;
  const double p_good = std::pow(inlier_ratio, sample_size);
  if (p_good <= 1e-300) return max_iterations;
  const double denom = std::log1p(-p_good);
  if (denom >= 0.0) return max_iterations;
  const double trials = std::log(1.0 - confidence) / denom;
  if (trials >= static_cast<double>(max_iterations)) return max_iterations;
  return std::max(1, static_cast<int>(std::ceil(trials)));
}

// Pre-sampled trial index sets so early termination cannot change the
// trial sequence and runs stay deterministic.
std::vector<std::vector<int>> draw_samples(std::uint64_t seed, int trial_count, int population,
                                           int sample_size) {
  Rng rng(seed);
  std::vector<std::vector<int>> samples(trial_count);
  std::vector<int> scratch;
  for (auto& sample : samples) {
    rng.sample_distinct<int>(population, sample_size, scratch);
    sample = scratch;
  }
  return samples;
}

struct Consensus {
  int count = -1;
  double mean_residual = std::numeric_limits<double>::infinity();
  int trial = -1;

  bool better_than(const Consensus& other) const {
    if (count != other.count) return count > other.count;
    if (mean_residual != other.mean_residual) return mean_residual < other.mean_residual;
    return trial < other.trial;
  }
};

}  // namespace

FundamentalPruneResult prune_matches_fundamental(const std::vector<FeatureMatch>& matches,
                                                 const RansacConfig& config) {
  constexpr int kSampleSize = 8;
  const int n = static_cast<int>(matches.size());
  if (n < kSampleSize) {
    throw Error(ErrorCode::TooFewMatches, "fundamental pruning needs at least 8 matches");
  }

  const auto samples = draw_samples(config.seed, config.max_iterations, n, kSampleSize);

  Consensus best;
  Eigen::Matrix3d best_model = Eigen::Matrix3d::Zero();
  int trials_used = 0;
  for (int trial = 0; trial < config.max_iterations; ++trial) {
    trials_used = trial + 1;

    std::vector<FeatureMatch> sample;
    sample.reserve(kSampleSize);
    for (int idx : samples[trial]) sample.push_back(matches[idx]);

    Eigen::Matrix3d model;
    try {
      model = estimate_fundamental(sample);
    } catch (const Error&) {
      continue;
    }

    Consensus current{0, 0.0, trial};
    double residual_sum = 0.0;
    for (const auto& match : matches) {
      const double d = sampson_distance(model, match.pixel_a, match.pixel_b);
      if (d < config.inlier_threshold) {
        ++current.count;
        residual_sum += d;
      }
    }
    current.mean_residual = current.count > 0 ? residual_sum / current.count
                                              : std::numeric_limits<double>::infinity();
    if (current.better_than(best)) {
      best = current;
      best_model = model;
    }

    const double ratio = static_cast<double>(std::max(best.count, 0)) / n;
    if (trials_used >= required_trials(config.confidence, ratio, kSampleSize, config.max_iterations)) {
      break;
    }
  }

  if (best.count < kSampleSize) {
    throw Error(ErrorCode::NoConsensus, "best consensus below the minimal sample size");
  }

  // Refit on the consensus inliers, then re-select so the reported set is
  // consistent with the reported model.
  std::vector<FeatureMatch> consensus_inliers;
  for (const auto& match : matches) {
    if (sampson_distance(best_model, match.pixel_a, match.pixel_b) < config.inlier_threshold) {
      consensus_inliers.push_back(match);
    }
  }
  Eigen::Matrix3d refit = best_model;
  try {
    refit = estimate_fundamental(consensus_inliers);
  } catch (const Error&) {
    // keep the consensus model
  }

  FundamentalPruneResult result;
  result.fundamental = refit;
  result.trials_used = trials_used;
  for (int i = 0; i < n; ++i) {
    if (sampson_distance(refit, matches[i].pixel_a, matches[i].pixel_b) < config.inlier_threshold) {
      result.inliers.push_back(matches[i]);
      result.inlier_indices.push_back(i);
    }
  }
  if (static_cast<int>(result.inliers.size()) < kSampleSize) {
    throw Error(ErrorCode::NoConsensus, "refit consensus below the minimal sample size");
  }
  return result;
}

HomographyGateResult homography_gate(const std::vector<FeatureMatch>& matches,
                                     const RansacConfig& config, double gate_fraction) {
  constexpr int kSampleSize = 4;
  const int n = static_cast<int>(matches.size());
  if (n < kSampleSize) {
    throw Error(ErrorCode::TooFewMatches, "homography gate needs at least 4 matches");
  }

  const auto samples = draw_samples(config.seed, config.max_iterations, n, kSampleSize);

  Consensus best;
  Eigen::Matrix3d best_model = Eigen::Matrix3d::Identity();
  int trials_used = 0;
  for (int trial = 0; trial < config.max_iterations; ++trial) {
    trials_used = trial + 1;

    std::vector<FeatureMatch> sample;
    sample.reserve(kSampleSize);
    for (int idx : samples[trial]) sample.push_back(matches[idx]);

    Eigen::Matrix3d model;
    try {
      model = estimate_homography(sample);
    } catch (const Error&) {
      continue;
    }
    const Eigen::Matrix3d model_inv = model.inverse();
    if (!model_inv.allFinite()) continue;

    Consensus current{0, 0.0, trial};
    double residual_sum = 0.0;
    for (const auto& match : matches) {
      const double d = symmetric_transfer_error(model, model_inv, match.pixel_a, match.pixel_b);
      if (d < config.inlier_threshold) {
        ++current.count;
        residual_sum += d;
      }
    }
    current.mean_residual = current.count > 0 ? residual_sum / current.count
                                              : std::numeric_limits<double>::infinity();
    if (current.better_than(best)) {
      best = current;
      best_model = model;
    }

    const double ratio = static_cast<double>(std::max(best.count, 0)) / n;
    if (trials_used >= required_trials(config.confidence, ratio, kSampleSize, config.max_iterations)) {
      break;
    }
  }

  HomographyGateResult result;
  result.trials_used = trials_used;
  if (best.count < kSampleSize) {
    result.passes = false;
    result.inlier_fraction = 0.0;
    return result;
  }

  // Refit on the consensus inliers for the reported model and fraction.
  std::vector<FeatureMatch> consensus_inliers;
  const Eigen::Matrix3d best_inv = best_model.inverse();
  for (const auto& match : matches) {
    if (symmetric_transfer_error(best_model, best_inv, match.pixel_a, match.pixel_b) <
        config.inlier_threshold) {
      consensus_inliers.push_back(match);
    }
  }
  Eigen::Matrix3d refit = best_model;
  try {
    refit = estimate_homography(consensus_inliers);
  } catch (const Error&) {
  }
  Eigen::Matrix3d refit_inv = refit.inverse();
  if (!refit_inv.allFinite()) {
    refit = best_model;
    refit_inv = best_inv;
  }

  int inliers = 0;
  for (const auto& match : matches) {
    if (symmetric_transfer_error(refit, refit_inv, match.pixel_a, match.pixel_b) <
        config.inlier_threshold) {
      ++inliers;
    }
  }
  result.inlier_fraction = static_cast<double>(inliers) / n;
  result.passes = result.inlier_fraction >= gate_fraction;
  if (result.passes) result.homography = refit;
  return result;
}

PnpRansacResult pnp_ransac(const std::vector<PixelPointPair>& correspondences,
                           const Camera& camera_init, const RansacConfig& config) {
  constexpr int kSampleSize = 4;
  const int n = static_cast<int>(correspondences.size());
  if (n < kSampleSize) {
    throw Error(ErrorCode::TooFewCorrespondences, "PnP RANSAC needs at least 4 correspondences");
  }

  const double threshold = config.inlier_threshold > 0.0
                               ? config.inlier_threshold
                               : 0.01 * camera_init.intrinsics.width;

  const auto samples = draw_samples(config.seed, config.max_iterations, n, kSampleSize);

  const auto reprojection_error = [&](const Pose& pose, const PixelPointPair& corr) -> double {
    const Camera camera{camera_init.intrinsics, pose};
    try {
      return (project(camera, corr.point) - corr.pixel).norm();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  PnpOptions trial_options;
  trial_options.lm.max_iterations = 25;

  Consensus best;
  Pose best_pose;
  int trials_used = 0;
  for (int trial = 0; trial < config.max_iterations; ++trial) {
    trials_used = trial + 1;

    std::vector<Correspondence2D3D> sample;
    sample.reserve(kSampleSize);
    for (int idx : samples[trial]) {
      sample.push_back({correspondences[idx].pixel, correspondences[idx].point, std::nullopt});
    }

    Pose pose;
    try {
      pose = solve_pnp(sample, camera_init.intrinsics, camera_init.pose, trial_options).pose;
    } catch (const Error&) {
      continue;
    }

    Consensus current{0, 0.0, trial};
    double residual_sum = 0.0;
    for (const auto& corr : correspondences) {
      const double d = reprojection_error(pose, corr);
      if (d < threshold) {
        ++current.count;
        residual_sum += d;
      }
    }
    current.mean_residual = current.count > 0 ? residual_sum / current.count
                                              : std::numeric_limits<double>::infinity();
    if (current.better_than(best)) {
      best = current;
      best_pose = pose;
    }

    const double ratio = static_cast<double>(std::max(best.count, 0)) / n;
    if (trials_used >= required_trials(config.confidence, ratio, kSampleSize, config.max_iterations)) {
      break;
    }
  }

  if (best.count < kSampleSize) {
    throw Error(ErrorCode::NoConsensus, "no pose reached the minimal consensus");
  }

  // Refine on the consensus set, then re-select under the refined pose.
  std::vector<Correspondence2D3D> consensus;
  for (const auto& corr : correspondences) {
    if (reprojection_error(best_pose, corr) < threshold) {
      consensus.push_back({corr.pixel, corr.point, std::nullopt});
    }
  }
  Pose refined = best_pose;
  try {
    refined = solve_pnp(consensus, camera_init.intrinsics, best_pose).pose;
  } catch (const Error&) {
  }

  PnpRansacResult result;
  result.pose = refined;
  result.trials_used = trials_used;
  for (int i = 0; i < n; ++i) {
    if (reprojection_error(refined, correspondences[i]) < threshold) {
      result.inlier_indices.push_back(i);
    }
  }
  if (static_cast<int>(result.inlier_indices.size()) < kSampleSize) {
    result.pose = best_pose;
    result.inlier_indices.clear();
    for (int i = 0; i < n; ++i) {
      if (reprojection_error(best_pose, correspondences[i]) < threshold) {
        result.inlier_indices.push_back(i);
      }
    }
  }
  return result;
}

}  // namespace masfm
