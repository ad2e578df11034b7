#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "expo/photometry.hpp"
#include "expo/so3.hpp"

namespace expo {

// Fixed bracket ladder, microseconds at 0 dB.
inline constexpr std::array<double, 5> kBracketLadderUs = {50.0, 200.0, 1000.0, 5000.0, 20000.0};
inline constexpr int kFrameWidth = 512;
inline constexpr int kFrameHeight = 384;
inline constexpr int kObsSize = 84;
inline constexpr int kObsFrames = 4;

struct Intrinsics {
  double fx = 400.0;
  double fy = 400.0;
  double cx = 255.5;
  double cy = 191.5;
};

struct BracketedFrame {
  std::array<Image, 5> images;
  double timestamp = 0.0;
};

// Throws DomainError unless the bracket matches the fixed ladder.
void validate(const BracketedFrame& frame);

struct BracketedSequence {
  std::vector<BracketedFrame> frames;
  CameraResponse crf;
  Intrinsics intrinsics;
  std::optional<std::vector<RigidPose>> gt_poses;
  double fps = 10.0;

  std::size_t size() const { return frames.size(); }
};

void validate(const BracketedSequence& seq);

struct AugmentationSpec {
  bool flip_h = false;
  bool flip_v = false;
  int skip = 1;
  bool reversed = false;

  bool operator==(const AugmentationSpec&) const = default;
};

// All 24 combinations in a fixed order; the identity spec comes first.
std::vector<AugmentationSpec> enumerate_augmentations();

// Number of addressable positions in the augmented sequence.
std::size_t augmented_length(std::size_t frames, const AugmentationSpec& aug);

// Base frame index for an augmented position; throws EndOfSequence past the
// end.
std::size_t augmented_frame_index(std::size_t frames, const AugmentationSpec& aug, std::size_t cursor);

// Ground-truth motion between two augmented positions, expressed with the
// flips applied to the camera axes.
RigidPose augmented_relative_pose(const BracketedSequence& seq, const AugmentationSpec& aug, std::size_t prev_cursor,
                                  std::size_t cursor);

Image apply_flips(const Image& img, const AugmentationSpec& aug);

// Four 84x84 planes, oldest first. Stored quantised to 8 bits; value()
// returns the normalised [0, 1] reading.
class Observation {
 public:
  static constexpr std::size_t kPlaneSize = static_cast<std::size_t>(kObsSize) * kObsSize;
  static constexpr std::size_t kSize = kPlaneSize * kObsFrames;

  Observation() : data_(kSize, 0) {}
  explicit Observation(std::vector<std::uint8_t> data);

  float value(int plane, int y, int x) const {
    return data_[plane * kPlaneSize + static_cast<std::size_t>(y) * kObsSize + x] / 255.0f;
  }
  std::span<const std::uint8_t> raw() const { return data_; }
  std::span<const std::uint8_t> plane(int p) const { return std::span(data_).subspan(p * kPlaneSize, kPlaneSize); }

  bool operator==(const Observation&) const = default;

 private:
  std::vector<std::uint8_t> data_;
};

// Area-averaging downscale to width x height, rounded to 8 bits.
std::vector<std::uint8_t> resize_area(const Image& img, int width, int height);

Observation stack_observation(const std::array<std::vector<std::uint8_t>, kObsFrames>& planes);

struct PathPoint {
  double offset_x = 0.0;  // panorama column of the crop window's left edge
  double offset_y = 0.0;  // panorama row of the crop window's top edge
  std::optional<double> yaw;  // heading override in radians
};

struct LightEvent {
  int frame = 0;
  double scale = 1.0;  // multiplies scene irradiance from this frame on
};

struct SceneSpec {
  int pano_width = 2400;
  int pano_height = 480;
  double dynamic_range = 3000.0;
  double mid_irradiance = 1e-3;  // geometric centre of the irradiance range
  int windows = 2;
  int rectangles = 400;
  std::vector<PathPoint> path;
  std::vector<LightEvent> light_events;
  double noise_sigma = 1.0;
  double crf_gamma = 2.2;
  double fps = 10.0;
  Intrinsics intrinsics;
};

// Cumulative product of light events up to and including `frame`.
double light_scale_at(const SceneSpec& spec, int frame);

IrradianceMap generate_panorama(std::uint64_t seed, const SceneSpec& spec);

// Camera heading (radians) for a path point.
double heading_of(const PathPoint& pose, const Intrinsics& k);

// Log irradiance seen by the virtual camera at `pose`, row-major 512x384.
std::vector<double> project_view(const IrradianceMap& pan, const PathPoint& pose, const Intrinsics& k);

struct RenderOptions {
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  double irradiance_scale = 1.0;
};

Image render_frame(const IrradianceMap& pan, const PathPoint& pose, double composite_exposure,
                   const CameraResponse& crf, const RenderOptions& options = {}, const Intrinsics& k = {});

// Forward model on a precomputed view: I = G^-1(ln e + ln E) + noise.
Image render_view(std::span<const double> log_irradiance, double composite_exposure, const CameraResponse& crf,
                  const RenderOptions& options);

BracketedFrame capture_bracket(const IrradianceMap& pan, const PathPoint& pose, const CameraResponse& crf,
                               const RenderOptions& options = {}, const Intrinsics& k = {});

// Bracket image with the largest exposure <= target; the 50 us image below
// the ladder.
const Image& select_seed(const BracketedFrame& frame, double target_exposure);

// Simulator read-out: seed selection, re-synthesis, then flips.
Image observe_at(const BracketedSequence& seq, const AugmentationSpec& aug, std::size_t cursor,
                 double target_exposure);

BracketedSequence generate_sequence(std::uint64_t seed, const SceneSpec& spec);

// Camera sweeping across the panorama with 4x light switches.
SceneSpec switching_scene_spec(int frames = 520);

// Static camera; light drops x1/16 at frame 100 and returns x16 at frame 200.
SceneSpec react_scene_spec(int frames = 300);

}  // namespace expo
