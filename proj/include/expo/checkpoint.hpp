#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "expo/replay.hpp"
#include "expo/sac.hpp"

namespace expo {

inline constexpr int kCheckpointVersion = 1;

// Trainer bookkeeping stored next to the networks.
struct TrainerCounters {
  int episode = 0;
  std::int64_t steps = 0;
  std::string rng_state;  // textual std::mt19937_64 state
};

struct LoadedCheckpoint {
  std::unique_ptr<SacAgent<float>> agent;
  TrainerCounters counters;
};

// Text header (JSON: version, network spec, SAC config, counters, RNG
// states) followed by named tensors with explicit lengths.
void save_checkpoint(const SacAgent<float>& agent, const TrainerCounters& counters,
                     const std::filesystem::path& path);

// `expected` (if given) must match the stored network spec.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const nn::NetworkSpec* expected = nullptr);

void save_replay(const ReplayBuffer& buffer, const std::filesystem::path& path);
void load_replay(ReplayBuffer& buffer, const std::filesystem::path& path);

}  // namespace expo
