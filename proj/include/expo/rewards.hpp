#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "expo/photometry.hpp"
#include "expo/scene.hpp"
#include "expo/so3.hpp"

namespace expo {

struct RewardConfig {
  double w_flk = 0.2;
  double w_detect = 0.005;
  double w_match = 0.005;
  double w_rot = 10.0;
  double w_trans = 1.0;
  double rot_cap = 1.0;
  int max_features = 1000;
  std::uint64_t ransac_seed = 0;
};

struct StepContext {
  const Image& current;
  const Image& previous;
  std::optional<RigidPose> gt_relative_pose;
};

using RewardFn = std::function<double(const StepContext&)>;

enum class RewardKind { kStat, kFeat, kPose };

RewardKind parse_reward_kind(const std::string& name);
std::string to_string(RewardKind kind);

// Brightness term 1 - |mu/255 - 0.5| / 0.5, peak at mid-gray.
double mean_brightness_reward(double mean_intensity);

double reward_stat(const StepContext& ctx, const RewardConfig& cfg = {});

struct FeatureCounts {
  int detected = 0;
  int matched = 0;
};

FeatureCounts count_features(const Image& current, const Image& previous, const RewardConfig& cfg = {});

double feature_reward(const FeatureCounts& counts, const RewardConfig& cfg = {});
double reward_feat(const StepContext& ctx, const RewardConfig& cfg = {});

struct PoseErrorTerms {
  double rotation = 0.0;     // capped geodesic angle, [0, rot_cap]
  double translation = 0.0;  // distance between unit directions, [0, 2]
};

// Error terms between an estimated and a ground-truth relative pose.
// Degenerate translations (norm <= 1e-6) score 0 when both are degenerate,
// 2 otherwise.
PoseErrorTerms pose_error_terms(const Mat3& r_img, const Vec3& t_img, bool img_degenerate, const RigidPose& gt,
                                const RewardConfig& cfg = {});

double pose_reward_from_terms(const PoseErrorTerms& terms, const RewardConfig& cfg = {});

// Reward earned when two-view reconstruction fails.
double pose_failure_reward(const RewardConfig& cfg = {});

double reward_pose(const StepContext& ctx, const Intrinsics& k, const RewardConfig& cfg = {});

RewardFn make_reward(RewardKind kind, const RewardConfig& cfg = {}, const Intrinsics& k = {});

}  // namespace expo
