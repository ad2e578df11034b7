#pragma once

#include <cstdint>
#include <vector>

#include "expo/orb.hpp"
#include "expo/scene.hpp"
#include "expo/so3.hpp"

namespace expo {

struct RansacOptions {
  double threshold_px = 3.0;
  double confidence = 0.99;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
};

struct HomographyFit {
  Mat3 H = Mat3::Identity();  // maps points of a onto b, H(2,2) = 1 when nonzero
  std::vector<bool> inliers;  // one flag per match
  int inlier_count = 0;
};

// Normalised 4-point DLT inside RANSAC. A match is an inlier when both the
// forward and the backward transfer errors are within threshold_px. Throws
// EstimationError with fewer than 4 matches or no model with 4 inliers.
HomographyFit ransac_homography(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                                const std::vector<Keypoint>& kps_b, const RansacOptions& options = {});

// Normalised DLT over all given correspondences (at least 4).
Mat3 fit_homography(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b);

// Normalised 8-point algorithm with rank-2 enforcement; x_b^T F x_a = 0.
Mat3 fit_fundamental(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b);

struct PoseEstimate {
  Mat3 rotation = Mat3::Identity();  // X_b = R X_a + t
  Vec3 translation = Vec3::Zero();   // unit norm unless degenerate
  bool degenerate_translation = false;
  bool from_homography = false;
  int inlier_count = 0;
  double mean_reproj_error = 0.0;
};

struct TwoViewOptions {
  int iterations = 200;
  double model_ratio = 0.45;
  // Relative singular-value spread below which a homography is read as a
  // pure rotation.
  double rotation_only_tolerance = 1e-3;
  std::uint64_t seed = 0;
};

// Two-frame reconstruction: homography and fundamental matrix estimated in
// parallel, the winner chosen by S_H / (S_H + S_F) > 0.45, then decomposed
// into motion hypotheses checked by triangulation.
PoseEstimate two_view_pose(const MatchSet& matches, const std::vector<Keypoint>& kps_a,
                           const std::vector<Keypoint>& kps_b, const Intrinsics& k, const TwoViewOptions& options = {});

}  // namespace expo
