#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "expo/rewards.hpp"
#include "expo/scene.hpp"

namespace expo {

struct EnvConfig {
  int episode_length = 500;
  bool augment = true;
  double init_exposure_min_us = 100.0;
  double init_exposure_max_us = 20000.0;
  std::uint64_t seed = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

// Episodic exposure-control environment replaying a bracketed sequence.
// Single-threaded; the sequence itself is shared read-only.
class ExposureEnv {
 public:
  ExposureEnv(std::shared_ptr<const BracketedSequence> sequence, RewardFn reward, EnvConfig config = {});

  Observation reset(std::uint64_t episode_seed);
  StepResult step(double action);

  // Overrides the exposure chosen at reset (used by evaluation drivers).
  void set_exposure(double composite_us);

  double current_exposure() const { return exposure_; }
  std::size_t cursor() const { return cursor_; }
  int episode_step() const { return episode_step_; }
  bool done() const { return done_; }
  const AugmentationSpec& augmentation() const { return aug_; }
  const Image& last_frame() const { return last_frame_; }
  Observation observation() const;
  const BracketedSequence& sequence() const { return *seq_; }
  const EnvConfig& config() const { return config_; }

 private:
  std::shared_ptr<const BracketedSequence> seq_;
  RewardFn reward_;
  EnvConfig config_;

  AugmentationSpec aug_;
  std::size_t cursor_ = 0;
  std::size_t length_ = 0;
  double exposure_ = 1000.0;
  std::array<std::vector<std::uint8_t>, kObsFrames> planes_;
  Image last_frame_;
  int episode_step_ = 0;
  bool started_ = false;
  bool done_ = false;
};

}  // namespace expo
