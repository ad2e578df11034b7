#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "expo/photometry.hpp"

namespace expo {

struct Keypoint {
  float x = 0.0f;  // level-0 pixel coordinates
  float y = 0.0f;
  float response = 0.0f;
  float orientation = 0.0f;  // radians
  int level = 0;
};

struct Descriptor {
  std::array<std::uint64_t, 4> bits{};

  bool operator==(const Descriptor&) const = default;
};

inline int hamming(const Descriptor& a, const Descriptor& b) {
  return std::popcount(a.bits[0] ^ b.bits[0]) + std::popcount(a.bits[1] ^ b.bits[1]) +
         std::popcount(a.bits[2] ^ b.bits[2]) + std::popcount(a.bits[3] ^ b.bits[3]);
}

struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  std::size_t size() const { return keypoints.size(); }
};

struct OrbOptions {
  int levels = 8;
  double scale = 1.2;
  int fast_threshold = 20;
  int fast_fallback = 7;
  int grid_cols = 8;
  int grid_rows = 6;
};

// Oriented FAST corners over an image pyramid with rotated BRIEF descriptors.
// At most max_n keypoints survive, spread with per-cell bucketing.
Features detect_features(const Image& img, int max_n, const OrbOptions& options = {});

struct Match {
  int index_a = 0;
  int index_b = 0;
  int distance = 0;
};

using MatchSet = std::vector<Match>;

// Mutual nearest neighbours under Hamming distance with a 0.8 ratio test.
MatchSet match_features(const Features& a, const Features& b, double ratio = 0.8);

}  // namespace expo
