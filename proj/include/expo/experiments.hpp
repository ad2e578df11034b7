#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "expo/controllers.hpp"
#include "expo/rewards.hpp"
#include "expo/scene.hpp"
#include "expo/trainer.hpp"

namespace expo {

inline constexpr const char* kArtifactVersion = "expo-lab 1.0";

// ---- closed-loop evaluation ----

struct MetricsRow {
  int frame = 0;
  double time_us = 0.0;
  double gain_db = 0.0;
  double composite_us = 0.0;
  double mean_intensity = 0.0;
  double saturation = 0.0;  // fraction of pixels at 0 or 255
  int n_detect = 0;
  int n_match = 0;
  double reward = 0.0;
  bool controller_failed = false;
};

inline constexpr const char* kMetricsHeader =
    "frame,time_us,gain_db,composite_us,mean_intensity,saturation_fraction,n_detect,n_match,reward,controller_failed";

struct EvalSummary {
  int frames = 0;
  double mean_match = 0.0;
  int min_match = 0;
  double total_reward = 0.0;
  double saturation_time_fraction = 0.0;  // mean saturation fraction over frames
};

struct EvalOptions {
  double initial_exposure_us = 1000.0;
  bool features = true;  // N_detect / N_match per frame
  RewardConfig reward_config;
};

struct EvalOutput {
  std::vector<MetricsRow> rows;
  EvalSummary summary;
};

double saturation_fraction(const Image& img);

// Frame i is rendered at e_i; the controller then proposes e_{i+1}.
EvalOutput run_eval(const BracketedSequence& seq, Controller& controller, const RewardFn& reward,
                    const EvalOptions& options = {});

EvalSummary summarize(const std::vector<MetricsRow>& rows);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

// ---- reaction to light switches ----

struct RecoveryOptions {
  int baseline_window = 10;
  double tolerance = 0.15;
  int consecutive = 3;
  int censor = 100;
};

struct Recovery {
  int frames = 0;
  bool censored = false;
};

// Frames from `event` to the first frame k that starts a run of
// `consecutive` frames within tolerance of the pre-event mean.
Recovery frames_to_recover(const std::vector<double>& means, int event, const RecoveryOptions& options = {});

struct ReactResult {
  std::string controller;
  std::vector<double> means;
  std::vector<double> exposures;
  std::vector<Recovery> recoveries;  // one per event
};

std::vector<ReactResult> run_react_test(const BracketedSequence& seq, const std::vector<int>& event_frames,
                                        const std::vector<Controller*>& controllers,
                                        double initial_exposure_us = 1000.0, const RecoveryOptions& options = {});

void write_react_outputs(const std::filesystem::path& dir, const std::vector<int>& event_frames,
                         const std::vector<ReactResult>& results, const std::string& tag = "");

// ---- augmentation ablation ----

// Centred running median; the window shrinks at the ends so the output has
// the input's length.
std::vector<double> median_filter(const std::vector<double>& values, int window = 100);

// Least-squares slope of y over x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

struct AblationOptions {
  TrainConfig train;  // augment is overridden per arm
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int eval_episodes = 1;
  int eval_episode_length = 200;
  int filter_window = 100;
};

struct AblationArm {
  std::uint64_t seed = 0;
  bool augment = false;
  std::vector<double> checkpoint_episodes;
  std::vector<double> eval_rewards;
  std::vector<double> train_rewards;
  double slope = 0.0;
};

struct AblationResult {
  std::vector<AblationArm> arms;
  double median_slope_aug = 0.0;
  double median_slope_plain = 0.0;
};

AblationResult run_ablation(const std::vector<std::shared_ptr<const BracketedSequence>>& train_sequences,
                            std::shared_ptr<const BracketedSequence> eval_sequence, const RewardFn& reward,
                            const AblationOptions& options, const std::filesystem::path& out_dir = {});

double median(std::vector<double> v);

}  // namespace expo
