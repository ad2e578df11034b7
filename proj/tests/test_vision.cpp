#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "expo/geometry.hpp"
#include "expo/orb.hpp"
#include "expo/so3.hpp"
#include "test_util.hpp"

using namespace expo;

namespace {

Image checkerboard_on_gray() {
  Image img(512, 384, 128);
  for (int y = 96; y < 288; ++y)
    for (int x = 128; x < 384; ++x) img(x, y) = ((x / 8 + y / 8) % 2) ? 255 : 0;
  return img;
}

// 90 degrees clockwise: (x, y) -> (h - 1 - y, x).
Image rotate_cw(const Image& img) {
  Image out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(img.height() - 1 - y, x) = img(x, y);
  return out;
}

struct Correspondences {
  std::vector<Keypoint> a, b;
  MatchSet matches;
};

Keypoint project(const Intrinsics& k, const Vec3& p) {
  Keypoint kp;
  kp.x = static_cast<float>(k.fx * p.x() / p.z() + k.cx);
  kp.y = static_cast<float>(k.fy * p.y() / p.z() + k.cy);
  return kp;
}

// Points in camera a, seen again by camera b with X_b = R X_a + t.
Correspondences two_views(const std::vector<Vec3>& pts, const Mat3& r, const Vec3& t, const Intrinsics& k) {
  Correspondences c;
  for (const auto& p : pts) {
    const Vec3 q = r * p + t;
    const Keypoint ka = project(k, p), kb = project(k, q);
    if (q.z() <= 0 || kb.x < 0 || kb.x > 511 || kb.y < 0 || kb.y > 383) continue;
    c.matches.push_back({static_cast<int>(c.a.size()), static_cast<int>(c.b.size()), 0});
    c.a.push_back(ka);
    c.b.push_back(kb);
  }
  return c;
}

std::vector<Vec3> plane_points(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-2.5, 2.5), uy(-1.8, 1.8);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(ux(rng), uy(rng), 5.0);
  return pts;
}

std::vector<Vec3> volume_points(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uz(3.0, 9.0), un(-0.5, 0.5);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const double z = uz(rng);
    pts.emplace_back(un(rng) * z * 1.2, un(rng) * z * 0.9, z);
  }
  return pts;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / M_PI;
}

double rotation_error_deg(const Mat3& a, const Mat3& b) { return rotation_angle(a.transpose() * b) * 180.0 / M_PI; }

Features random_descriptors(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  Features f;
  for (int i = 0; i < n; ++i) {
    Keypoint kp;
    kp.x = static_cast<float>(i % 500);
    kp.y = static_cast<float>(i / 500);
    f.keypoints.push_back(kp);
    Descriptor d;
    for (auto& w : d.bits) w = rng();
    f.descriptors.push_back(d);
  }
  return f;
}

}  // namespace

TEST(Orb, UniformImageHasNoCorners) {
  EXPECT_EQ(detect_features(Image(512, 384, 90), 1000).size(), 0u);
}

TEST(Orb, CheckerboardAndCap) {
  const auto img = checkerboard_on_gray();
  const auto f = detect_features(img, 1000);
  EXPECT_GE(f.size(), 50u);
  EXPECT_EQ(f.keypoints.size(), f.descriptors.size());
  for (const auto& kp : f.keypoints) {
    EXPECT_GE(kp.x, 0.0f);
    EXPECT_LT(kp.x, 512.0f);
    EXPECT_GE(kp.y, 0.0f);
    EXPECT_LT(kp.y, 384.0f);
  }
  EXPECT_LE(detect_features(img, 10).size(), 10u);
  EXPECT_LE(detect_features(test::textured_image(1), 1000).size(), 1000u);
}

TEST(Orb, Deterministic) {
  const auto img = test::textured_image(4);
  const auto a = detect_features(img, 500), b = detect_features(img, 500);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.descriptors, b.descriptors);
}

TEST(Orb, SpreadsOverGrid) {
  const auto f = detect_features(test::textured_image(2), 300);
  std::set<int> cells;
  for (const auto& kp : f.keypoints) cells.insert(static_cast<int>(kp.x / 64) + 8 * static_cast<int>(kp.y / 64));
  EXPECT_GE(cells.size(), 30u);
}

TEST(Orb, RotationCovariance) {
  const auto img = test::textured_image(8);
  const auto rot = rotate_cw(img);
  const auto fa = detect_features(img, 1000), fb = detect_features(rot, 1000);
  int pairs = 0, far = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const auto& ka = fa.keypoints[i];
    if (ka.level != 0) continue;
    const float tx = static_cast<float>(img.height() - 1) - ka.y, ty = ka.x;
    for (std::size_t j = 0; j < fb.size(); ++j) {
      const auto& kb = fb.keypoints[j];
      if (kb.level != 0 || std::abs(kb.x - tx) > 0.5f || std::abs(kb.y - ty) > 0.5f) continue;
      ++pairs;
      if (hamming(fa.descriptors[i], fb.descriptors[j]) > 40) ++far;
      break;
    }
  }
  ASSERT_GE(pairs, 50);
  EXPECT_LT(far, 0.3 * pairs);
}

TEST(Match, IdenticalInputs) {
  const auto f = detect_features(test::textured_image(3), 400);
  const auto m = match_features(f, f);
  ASSERT_GT(f.size(), 100u);
  // Exact duplicate descriptors can fail the ratio test; everything else
  // matches itself.
  EXPECT_GE(m.size(), f.size() * 9 / 10);
  for (const auto& x : m) {
    EXPECT_EQ(x.index_a, x.index_b);
    EXPECT_EQ(x.distance, 0);
  }
}

TEST(Match, RandomDescriptorsRejected) {
  const auto a = random_descriptors(1, 1000), b = random_descriptors(2, 1000);
  EXPECT_LT(match_features(a, b).size(), 50u);
  EXPECT_TRUE(match_features(a, Features{}).empty());
  EXPECT_TRUE(match_features(Features{}, a).empty());
}

TEST(Match, Symmetric) {
  const auto a = detect_features(test::textured_image(5), 500);
  Image shifted(512, 384, 90);
  const auto src = test::textured_image(5);
  for (int y = 0; y < 384; ++y)
    for (int x = 0; x < 512; ++x) shifted(x, y) = src(std::clamp(x - 7, 0, 511), std::clamp(y + 4, 0, 383));
  const auto b = detect_features(shifted, 500);
  auto ab = match_features(a, b), ba = match_features(b, a);
  std::set<std::pair<int, int>> s1, s2;
  for (const auto& m : ab) s1.insert({m.index_a, m.index_b});
  for (const auto& m : ba) s2.insert({m.index_b, m.index_a});
  EXPECT_EQ(s1, s2);
  EXPECT_GT(s1.size(), 100u);
  std::set<int> ia, ib;
  for (const auto& m : ab) {
    EXPECT_TRUE(ia.insert(m.index_a).second);
    EXPECT_TRUE(ib.insert(m.index_b).second);
  }
}

TEST(Ransac, TranslationAndOutliers) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> ux(10, 500), uy(10, 370);
  std::vector<Keypoint> a, b;
  MatchSet m;
  for (int i = 0; i < 100; ++i) {
    Keypoint p;
    p.x = ux(rng);
    p.y = uy(rng);
    Keypoint q = p;
    q.x += 5.0f;
    q.y -= 3.0f;
    a.push_back(p);
    b.push_back(q);
    m.push_back({i, i, 0});
  }
  const auto clean = ransac_homography(m, a, b);
  EXPECT_EQ(clean.inlier_count, 100);
  Mat3 want = Mat3::Identity();
  want(0, 2) = 5.0;
  want(1, 2) = -3.0;
  EXPECT_LT((clean.H - want).cwiseAbs().maxCoeff(), 1e-6);

  // 30 of the 100 targets moved far off the model.
  std::set<int> planted;
  for (int i = 0; i < 100; i += 10)
    for (int j = 0; j < 3; ++j) {
      b[i + j].x = ux(rng);
      b[i + j].y = uy(rng);
      planted.insert(i + j);
    }
  const auto noisy = ransac_homography(m, a, b);
  EXPECT_LT((noisy.H - want).cwiseAbs().maxCoeff(), 1e-3);
  for (int i = 0; i < 100; ++i) {
    const bool far = std::hypot(b[i].x - a[i].x - 5.0f, b[i].y - a[i].y + 3.0f) > 3.0f;
    if (planted.count(i) && far) {
      EXPECT_FALSE(noisy.inliers[i]);
    } else if (!planted.count(i)) {
      EXPECT_TRUE(noisy.inliers[i]);
    }
  }
  const auto again = ransac_homography(m, a, b);
  EXPECT_EQ(again.H, noisy.H);
  EXPECT_EQ(again.inliers, noisy.inliers);

  MatchSet three(m.begin(), m.begin() + 3);
  EXPECT_THROW(ransac_homography(three, a, b), EstimationError);
}

TEST(TwoView, TranslationOverPlane) {
  const Intrinsics k;
  const auto c = two_views(plane_points(1, 200), Mat3::Identity(), Vec3(0.1, 0, 0), k);
  const auto pose = two_view_pose(c.matches, c.a, c.b, k);
  EXPECT_LT(rotation_error_deg(pose.rotation, Mat3::Identity()), 0.5);
  ASSERT_FALSE(pose.degenerate_translation);
  EXPECT_LT(angle_deg(pose.translation, Vec3(1, 0, 0)), 1.0);
  EXPECT_NEAR(pose.translation.norm(), 1.0, 1e-9);
  EXPECT_TRUE(is_rotation(pose.rotation));
}

TEST(TwoView, GeneralMotionInVolume) {
  const Intrinsics k;
  const Mat3 r = so3_exp(Vec3(0.01, 0.04, -0.02));
  const Vec3 t(0.15, -0.05, 0.1);
  const auto c = two_views(volume_points(2, 300), r, t, k);
  const auto pose = two_view_pose(c.matches, c.a, c.b, k);
  EXPECT_FALSE(pose.from_homography);
  EXPECT_LT(rotation_error_deg(pose.rotation, r), 0.5);
  EXPECT_LT(angle_deg(pose.translation, t), 1.0);
  EXPECT_TRUE(is_rotation(pose.rotation));
}

TEST(TwoView, PureRotation) {
  const Intrinsics k;
  const Mat3 r = rot_y(5.0 * M_PI / 180.0);
  const auto c = two_views(volume_points(3, 300), r, Vec3::Zero(), k);
  const auto pose = two_view_pose(c.matches, c.a, c.b, k);
  EXPECT_LT(rotation_error_deg(pose.rotation, r), 0.5);
  EXPECT_TRUE(pose.degenerate_translation);
  EXPECT_TRUE(is_rotation(pose.rotation));
}

TEST(TwoView, TooFewMatches) {
  const Intrinsics k;
  auto c = two_views(plane_points(4, 7), Mat3::Identity(), Vec3(0.1, 0, 0), k);
  ASSERT_EQ(c.matches.size(), 7u);
  EXPECT_THROW(two_view_pose(c.matches, c.a, c.b, k), EstimationError);
}

TEST(So3, Examples) {
  EXPECT_EQ(so3_log(Mat3::Identity()), Vec3::Zero());
  EXPECT_LT((so3_log(rot_z(M_PI / 2)) - Vec3(0, 0, M_PI / 2)).norm(), 1e-9);
  EXPECT_EQ(so3_exp(Vec3::Zero()), Mat3::Identity());
  const Mat3 flip = Vec3(-1, -1, 1).asDiagonal();
  EXPECT_LT((so3_exp(Vec3(0, 0, M_PI)) - flip).cwiseAbs().maxCoeff(), 1e-9);
  // Near pi the axis still comes back.
  const Vec3 w = Vec3(1, 2, -0.5).normalized() * (M_PI - 1e-6);
  EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-5);
}

TEST(So3, RoundTripAndInvariants) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ang(0.0, M_PI - 0.1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 w = Vec3(n(rng), n(rng), n(rng)).normalized() * ang(rng);
    const Mat3 r = so3_exp(w);
    ASSERT_TRUE(is_rotation(r));
    ASSERT_LT((so3_log(r) - w).norm(), 1e-9);
    ASSERT_NEAR(so3_log(r).norm(), rotation_angle(r), 1e-9);
  }
}
