#include "expo/env.hpp"

#include <cmath>

namespace expo {

ExposureEnv::ExposureEnv(std::shared_ptr<const BracketedSequence> sequence, RewardFn reward, EnvConfig config)
    : seq_(std::move(sequence)), reward_(std::move(reward)), config_(config) {
  if (!seq_) throw ConfigError("environment needs a sequence");
  validate(*seq_);
  if (config_.episode_length < 1 || config_.episode_length > 500) {
    throw ConfigError("episode_length must be in [1, 500]");
  }
}

Observation ExposureEnv::reset(std::uint64_t episode_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(episode_seed), static_cast<std::uint32_t>(episode_seed >> 32)};
  std::mt19937_64 rng(seq);

  // Augmentations whose playback leaves room for the primed history and at
  // least one step.
  std::vector<AugmentationSpec> candidates;
  const auto all = config_.augment ? enumerate_augmentations() : std::vector<AugmentationSpec>{AugmentationSpec{}};
  for (const auto& a : all) {
    if (augmented_length(seq_->size(), a) >= static_cast<std::size_t>(kObsFrames + 1)) candidates.push_back(a);
  }
  if (candidates.empty()) throw ConfigError("sequence too short for any augmentation");
  aug_ = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  length_ = augmented_length(seq_->size(), aug_);

  const std::size_t room = length_ - kObsFrames;
  const std::size_t steps = std::min<std::size_t>(room, static_cast<std::size_t>(config_.episode_length));
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, room - steps)(rng);

  std::uniform_real_distribution<double> log_exp(std::log(config_.init_exposure_min_us),
                                                 std::log(config_.init_exposure_max_us));
  exposure_ = std::exp(log_exp(rng));

  for (int i = 0; i < kObsFrames; ++i) {
    last_frame_ = observe_at(*seq_, aug_, start + i, exposure_);
    planes_[i] = resize_area(last_frame_, kObsSize, kObsSize);
  }
  cursor_ = start + kObsFrames - 1;
  episode_step_ = 0;
  started_ = true;
  done_ = false;
  return observation();
}

void ExposureEnv::set_exposure(double composite_us) {
  exposure_ = std::clamp(composite_us, kMinComposite, kMaxComposite);
}

Observation ExposureEnv::observation() const { return stack_observation(planes_); }

StepResult ExposureEnv::step(double action) {
  if (!started_) throw ProtocolError("step() before reset()");
  if (done_) throw ProtocolError("step() after the episode finished");
  const double next_exposure = apply_ev_delta(exposure_, action);
  const std::size_t prev_cursor = cursor_;
  Image frame = observe_at(*seq_, aug_, cursor_ + 1, next_exposure);
  ++cursor_;
  exposure_ = next_exposure;

  std::optional<RigidPose> gt;
  if (seq_->gt_poses) gt = augmented_relative_pose(*seq_, aug_, prev_cursor, cursor_);
  const double reward = reward_ ? reward_(StepContext{frame, last_frame_, gt}) : 0.0;

  for (int i = 0; i + 1 < kObsFrames; ++i) planes_[i] = std::move(planes_[i + 1]);
  planes_[kObsFrames - 1] = resize_area(frame, kObsSize, kObsSize);
  last_frame_ = std::move(frame);
  ++episode_step_;
  done_ = episode_step_ >= config_.episode_length || cursor_ + 1 >= length_;
  return {observation(), reward, done_};
}

}  // namespace expo
