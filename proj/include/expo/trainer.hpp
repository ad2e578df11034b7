#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "expo/checkpoint.hpp"
#include "expo/env.hpp"
#include "expo/replay.hpp"
#include "expo/sac.hpp"

namespace expo {

struct TrainConfig {
  SacConfig sac;
  nn::NetworkSpec network;
  int episodes = 100;
  std::int64_t max_steps = 0;  // 0: no step cap
  int checkpoint_every = 1000;  // episodes; 0 disables periodic checkpoints
  bool augment = true;
  bool save_replay = false;  // sidecar replay file so resumes are exact
  std::uint64_t seed = 0;
};

struct EpisodeLog {
  int episode = 0;
  std::int64_t steps = 0;  // cumulative env steps at episode end
  double total_reward = 0.0;
  double critic_loss = 0.0;  // mean over the episode's updates, 0 if none
  double actor_loss = 0.0;
  double alpha = 0.0;
};

inline constexpr const char* kTrainLogHeader = "episode,steps,total_reward,critic_loss,actor_loss,alpha";

class Trainer {
 public:
  using CheckpointHook = std::function<void(int episode, const SacAgent<float>&)>;

  // Writes train_log.csv and checkpoints under out_dir (if non-empty).
  Trainer(std::vector<std::shared_ptr<const BracketedSequence>> sequences, RewardFn reward, TrainConfig config,
          std::filesystem::path out_dir = {});

  // Continues from a checkpoint (and replay sidecar when present).
  void resume(const std::filesystem::path& checkpoint);

  // Runs until config.episodes or max_steps is reached.
  void run();

  void set_checkpoint_hook(CheckpointHook hook) { hook_ = std::move(hook); }

  const SacAgent<float>& agent() const { return *agent_; }
  SacAgent<float>& agent() { return *agent_; }
  const std::vector<EpisodeLog>& log() const { return log_; }
  std::int64_t steps() const { return steps_; }
  int episode() const { return episode_; }

  void save(const std::filesystem::path& path) const;

 private:
  EpisodeLog run_episode();
  void append_log(const EpisodeLog& row);

  std::vector<std::shared_ptr<const BracketedSequence>> sequences_;
  std::vector<ExposureEnv> envs_;
  TrainConfig config_;
  std::filesystem::path out_dir_;
  std::unique_ptr<SacAgent<float>> agent_;
  ReplayBuffer replay_;
  std::mt19937_64 rng_;
  int episode_ = 0;
  std::int64_t steps_ = 0;
  std::vector<EpisodeLog> log_;
  CheckpointHook hook_;
};

struct EvalResult {
  std::vector<double> frame_means;  // every rendered frame after the primed history
  std::vector<double> episode_rewards;
};

// Deterministic-policy rollouts (no augmentation) from fixed episode seeds.
EvalResult evaluate_policy(const Actor<float>& actor, std::shared_ptr<const BracketedSequence> sequence,
                           RewardFn reward, int episodes, std::uint64_t seed, int episode_length = 500);

std::vector<EpisodeLog> read_train_log(const std::filesystem::path& path);

}  // namespace expo
