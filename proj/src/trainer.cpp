#include "expo/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace expo {

namespace fs = std::filesystem;

namespace {

std::string format_row(const EpisodeLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%lld,%.9g,%.9g,%.9g,%.9g", r.episode, static_cast<long long>(r.steps),
                r.total_reward, r.critic_loss, r.actor_loss, r.alpha);
  return buf;
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

}  // namespace

Trainer::Trainer(std::vector<std::shared_ptr<const BracketedSequence>> sequences, RewardFn reward, TrainConfig config,
                 fs::path out_dir)
    : sequences_(std::move(sequences)),
      config_(std::move(config)),
      out_dir_(std::move(out_dir)),
      replay_(static_cast<std::size_t>(config_.sac.buffer)),
      rng_(config_.seed) {
  config_.sac.validate();
  if (sequences_.empty()) throw ConfigError("training needs at least one sequence");
  if (config_.episodes < 0) throw ConfigError("episodes must be >= 0");
  EnvConfig ec;
  ec.episode_length = config_.sac.episode_len;
  ec.augment = config_.augment;
  ec.seed = config_.seed;
  for (const auto& s : sequences_) envs_.emplace_back(s, reward, ec);
  agent_ = std::make_unique<SacAgent<float>>(config_.network, config_.sac, config_.seed ^ 0x5ac5ac5ac5ac5acULL);
  if (!out_dir_.empty()) {
    fs::create_directories(out_dir_);
    std::ofstream(out_dir_ / "train_log.csv") << kTrainLogHeader << "\n";
  }
}

void Trainer::resume(const fs::path& checkpoint) {
  auto loaded = load_checkpoint(checkpoint, &config_.network);
  agent_ = std::move(loaded.agent);
  episode_ = loaded.counters.episode;
  steps_ = loaded.counters.steps;
  std::istringstream s(loaded.counters.rng_state);
  s >> rng_;
  const fs::path sidecar = checkpoint.string() + ".replay";
  if (fs::exists(sidecar)) {
    load_replay(replay_, sidecar);
  } else {
    spdlog::warn("no replay sidecar next to {}; resuming with an empty buffer", checkpoint.string());
  }
}

void Trainer::save(const fs::path& path) const {
  save_checkpoint(*agent_, {episode_, steps_, rng_text(rng_)}, path);
  if (config_.save_replay) save_replay(replay_, path.string() + ".replay");
}

void Trainer::append_log(const EpisodeLog& row) {
  log_.push_back(row);
  if (out_dir_.empty()) return;
  std::ofstream out(out_dir_ / "train_log.csv", std::ios::app);
  out << format_row(row) << "\n";
  if (!out) throw std::runtime_error("cannot append to training log");
}

EpisodeLog Trainer::run_episode() {
  const std::size_t which = std::uniform_int_distribution<std::size_t>(0, envs_.size() - 1)(rng_);
  const std::uint64_t episode_seed = rng_();
  auto& env = envs_[which];
  Observation obs = env.reset(episode_seed);
  const auto& sac = agent_->config();
  std::uniform_real_distribution<double> uniform_action(-kActionScale, kActionScale);

  EpisodeLog row;
  row.episode = episode_ + 1;
  double critic_sum = 0.0, actor_sum = 0.0;
  int updates = 0;
  bool done = false;
  while (!done) {
    if (config_.max_steps > 0 && steps_ >= config_.max_steps) break;
    double action;
    if (steps_ < sac.warmup) {
      action = uniform_action(rng_);
    } else {
      action = agent_->sample(observation_row<float>(obs)).action;
    }
    StepResult r = env.step(action);
    ++steps_;
    row.total_reward += r.reward;
    // Episode truncation is not a terminal state: keep bootstrapping.
    replay_.push(compact(obs, action, r.reward, r.observation, false));
    obs = std::move(r.observation);
    done = r.done;

    if (steps_ >= sac.warmup && steps_ % sac.update_period_frames == 0 &&
        replay_.size() >= static_cast<std::size_t>(sac.batch)) {
      for (int u = 0; u < sac.updates_per_period; ++u) {
        const auto idx = replay_.sample_indices(rng_, sac.batch);
        const auto losses = agent_->update(gather_batch<float>(replay_, idx));
        critic_sum += losses.critic;
        actor_sum += losses.actor;
        ++updates;
      }
    }
  }
  row.steps = steps_;
  if (updates > 0) {
    row.critic_loss = critic_sum / updates;
    row.actor_loss = actor_sum / updates;
  }
  row.alpha = agent_->alpha();
  return row;
}

void Trainer::run() {
  while (episode_ < config_.episodes) {
    if (config_.max_steps > 0 && steps_ >= config_.max_steps) break;
    const EpisodeLog row = run_episode();
    ++episode_;
    append_log(row);
    spdlog::debug("episode {} steps {} reward {:.3f} alpha {:.4f}", row.episode, row.steps, row.total_reward,
                  row.alpha);
    if (config_.checkpoint_every > 0 && episode_ % config_.checkpoint_every == 0) {
      if (!out_dir_.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06d.bin", episode_);
        save(out_dir_ / name);
      }
      if (hook_) hook_(episode_, *agent_);
    }
  }
  if (!out_dir_.empty() && episode_ > 0) save(out_dir_ / "final.bin");
}

EvalResult evaluate_policy(const Actor<float>& actor, std::shared_ptr<const BracketedSequence> sequence,
                           RewardFn reward, int episodes, std::uint64_t seed, int episode_length) {
  EnvConfig ec;
  ec.augment = false;
  ec.seed = seed;
  ec.episode_length = episode_length;
  ExposureEnv env(std::move(sequence), std::move(reward), ec);
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env.reset(static_cast<std::uint64_t>(e));
    double total = 0.0;
    bool done = false;
    while (!done) {
      typename Actor<float>::Cache c;
      const auto& head = actor.forward(observation_row<float>(obs), c);
      StepResult r = env.step(kActionScale * std::tanh(static_cast<double>(head(0, 0))));
      out.frame_means.push_back(env.last_frame().mean());
      total += r.reward;
      obs = std::move(r.observation);
      done = r.done;
    }
    out.episode_rewards.push_back(total);
  }
  return out;
}

std::vector<EpisodeLog> read_train_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string() + ": cannot open training log");
  std::string line;
  std::getline(in, line);
  if (line != kTrainLogHeader) throw LoadError(path.string() + ": unexpected header");
  std::vector<EpisodeLog> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpisodeLog r;
    long long steps = 0;
    if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lf,%lf,%lf", &r.episode, &steps, &r.total_reward, &r.critic_loss,
                    &r.actor_loss, &r.alpha) != 6)
      throw LoadError(path.string() + ": malformed row '" + line + "'");
    r.steps = steps;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace expo
