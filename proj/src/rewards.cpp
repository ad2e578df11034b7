#include "expo/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "expo/errors.hpp"
#include "expo/geometry.hpp"
#include "expo/orb.hpp"

namespace expo {

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "stat") return RewardKind::kStat;
  if (name == "feat") return RewardKind::kFeat;
  if (name == "pose") return RewardKind::kPose;
  throw ConfigError("unknown reward kind '" + name + "' (expected stat|feat|pose)");
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::kStat: return "stat";
    case RewardKind::kFeat: return "feat";
    case RewardKind::kPose: return "pose";
  }
  return "?";
}

double mean_brightness_reward(double mean_intensity) {
  return 1.0 - std::abs(mean_intensity / 255.0 - 0.5) / 0.5;
}

double reward_stat(const StepContext& ctx, const RewardConfig& cfg) {
  const double mu = ctx.current.mean();
  const double flicker = std::abs(mu - ctx.previous.mean()) / 255.0;
  return mean_brightness_reward(mu) - cfg.w_flk * flicker;
}

FeatureCounts count_features(const Image& current, const Image& previous, const RewardConfig& cfg) {
  FeatureCounts out;
  const Features cur = detect_features(current, cfg.max_features);
  out.detected = static_cast<int>(cur.size());
  if (cur.size() < 4) return out;
  const Features prev = detect_features(previous, cfg.max_features);
  const MatchSet matches = match_features(prev, cur);
  try {
    RansacOptions ro;
    ro.seed = cfg.ransac_seed;
    out.matched = ransac_homography(matches, prev.keypoints, cur.keypoints, ro).inlier_count;
  } catch (const EstimationError&) {
    out.matched = 0;
  }
  return out;
}

double feature_reward(const FeatureCounts& counts, const RewardConfig& cfg) {
  return cfg.w_detect * counts.detected + cfg.w_match * counts.matched;
}

double reward_feat(const StepContext& ctx, const RewardConfig& cfg) {
  return feature_reward(count_features(ctx.current, ctx.previous, cfg), cfg);
}

PoseErrorTerms pose_error_terms(const Mat3& r_img, const Vec3& t_img, bool img_degenerate, const RigidPose& gt,
                                const RewardConfig& cfg) {
  PoseErrorTerms out;
  out.rotation = std::min(cfg.rot_cap, so3_log(r_img.transpose() * gt.rotation).norm());
  const bool deg_img = img_degenerate || t_img.norm() <= 1e-6;
  const bool deg_gt = gt.translation.norm() <= 1e-6;
  if (deg_img || deg_gt) {
    out.translation = (deg_img && deg_gt) ? 0.0 : 2.0;
  } else {
    out.translation = (t_img.normalized() - gt.translation.normalized()).norm();
  }
  return out;
}

double pose_reward_from_terms(const PoseErrorTerms& terms, const RewardConfig& cfg) {
  return -cfg.w_rot * terms.rotation - cfg.w_trans * terms.translation;
}

double pose_failure_reward(const RewardConfig& cfg) {
  return -cfg.w_rot * cfg.rot_cap - cfg.w_trans * 2.0;
}

double reward_pose(const StepContext& ctx, const Intrinsics& k, const RewardConfig& cfg) {
  if (!ctx.gt_relative_pose) throw ConfigError("pose reward requires ground-truth poses (poses.csv)");
  try {
    const Features prev = detect_features(ctx.previous, cfg.max_features);
    const Features cur = detect_features(ctx.current, cfg.max_features);
    const MatchSet matches = match_features(prev, cur);
    TwoViewOptions tv;
    tv.seed = cfg.ransac_seed;
    const PoseEstimate est = two_view_pose(matches, prev.keypoints, cur.keypoints, k, tv);
    return pose_reward_from_terms(
        pose_error_terms(est.rotation, est.translation, est.degenerate_translation, *ctx.gt_relative_pose, cfg), cfg);
  } catch (const EstimationError&) {
    return pose_failure_reward(cfg);
  }
}

RewardFn make_reward(RewardKind kind, const RewardConfig& cfg, const Intrinsics& k) {
  switch (kind) {
    case RewardKind::kStat: return [cfg](const StepContext& c) { return reward_stat(c, cfg); };
    case RewardKind::kFeat: return [cfg](const StepContext& c) { return reward_feat(c, cfg); };
    case RewardKind::kPose: return [cfg, k](const StepContext& c) { return reward_pose(c, k, cfg); };
  }
  throw ConfigError("unknown reward kind");
}

}  // namespace expo
