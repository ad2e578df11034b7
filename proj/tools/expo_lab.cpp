// expo-lab: command-line front end for the exposure-control lab.

#include <malloc.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "expo/config.hpp"
#include "expo/controllers.hpp"
#include "expo/experiments.hpp"
#include "expo/image_io.hpp"
#include "expo/plot.hpp"
#include "expo/sequence_io.hpp"
#include "expo/trainer.hpp"

namespace fs = std::filesystem;
using namespace expo;

namespace {

fs::path output_dir(const Json& cfg, const std::string& override_out) {
  if (!override_out.empty()) return override_out;
  return require<std::string>(cfg, "output");
}

void write_manifest(const fs::path& dir, const std::string& command, const Json& cfg) {
  fs::create_directories(dir);
  Json m;
  m["command"] = command;
  m["version"] = kArtifactVersion;
  m["seed"] = cfg.value("seed", 0);
  m["config"] = cfg;
  std::ofstream(dir / "manifest.json") << m.dump(2) << "\n";
}

std::shared_ptr<const BracketedSequence> open_sequence(const std::string& path) {
  if (!fs::exists(path)) throw LoadError("sequence path '" + path + "' does not exist");
  return std::make_shared<const BracketedSequence>(load_sequence(path));
}

// "sequence" (directory) wins over "scene" (generated in memory with the master seed).
std::shared_ptr<const BracketedSequence> sequence_from(const Json& cfg, const std::string& seq_key,
                                                       const std::string& scene_key, const Json& fallback_scene) {
  if (cfg.contains(seq_key)) return open_sequence(require<std::string>(cfg, seq_key));
  const SceneSpec spec = parse_scene(cfg.contains(scene_key) ? cfg.at(scene_key) : fallback_scene);
  return std::make_shared<const BracketedSequence>(generate_sequence(cfg.value("seed", 0ULL), spec));
}

std::vector<std::shared_ptr<const BracketedSequence>> training_sequences(const Json& cfg) {
  std::vector<std::shared_ptr<const BracketedSequence>> out;
  if (cfg.contains("sequences")) {
    for (const auto& p : require<std::vector<std::string>>(cfg, "sequences")) out.push_back(open_sequence(p));
  } else {
    out.push_back(sequence_from(cfg, "sequence", "scene", "switching"));
  }
  return out;
}

RewardFn reward_from(const Json& cfg, const BracketedSequence& seq) {
  const auto kind = parse_reward_kind(get_or<std::string>(cfg, "reward", "stat"));
  const RewardConfig rc = cfg.contains("reward_config") ? parse_reward_config(cfg.at("reward_config")) : RewardConfig{};
  if (kind == RewardKind::kPose && !seq.gt_poses)
    throw ConfigError("config key 'reward' is pose but the sequence has no poses.csv");
  return make_reward(kind, rc, seq.intrinsics);
}

int cmd_calibrate(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "sequences", "frames", "output", "smoothness", "sample_sites"});
  const auto seqs = require<std::vector<std::string>>(cfg, "sequences");
  const int frames = get_or(cfg, "frames", 8);
  std::vector<std::vector<Image>> stacks;
  for (const auto& p : seqs) {
    const auto seq = open_sequence(p);
    const std::size_t step = std::max<std::size_t>(1, seq->size() / std::max(frames, 1));
    for (std::size_t f = 0; f < seq->size() && static_cast<int>(stacks.size()) < frames * static_cast<int>(seqs.size());
         f += step)
      stacks.emplace_back(seq->frames[f].images.begin(), seq->frames[f].images.end());
  }
  CalibrationOptions opts;
  opts.seed = require<std::uint64_t>(cfg, "seed");
  opts.smoothness = get_or(cfg, "smoothness", opts.smoothness);
  opts.sample_sites = get_or(cfg, "sample_sites", opts.sample_sites);
  const auto crf = calibrate_crf(stacks, opts);
  const fs::path out = out_override.empty() ? fs::path(require<std::string>(cfg, "output")) : fs::path(out_override);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  crf.save(out);
  write_manifest(out.parent_path().empty() ? fs::path(".") : out.parent_path(), "calibrate-crf", cfg);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_gen_scene(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "scene", "output"});
  const auto seed = require<std::uint64_t>(cfg, "seed");
  const SceneSpec spec = parse_scene(cfg.contains("scene") ? cfg.at("scene") : Json("switching"));
  const fs::path out = output_dir(cfg, out_override);
  save_sequence(generate_sequence(seed, spec), out);
  write_manifest(out, "gen-scene", cfg);
  std::cout << "wrote " << spec.path.size() << " frames to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "sequence", "sequences", "scene", "reward", "reward_config", "sac", "network", "episodes",
                   "max_steps", "checkpoint_every", "augment", "save_replay", "resume", "output", "eval_episodes"});
  const TrainConfig tc = parse_train_config(cfg);
  const fs::path out = output_dir(cfg, out_override);
  const auto seqs = training_sequences(cfg);
  const RewardFn reward = reward_from(cfg, *seqs.front());
  write_manifest(out, "train", cfg);
  Trainer trainer(seqs, reward, tc, out);
  if (cfg.contains("resume")) trainer.resume(require<std::string>(cfg, "resume"));
  trainer.run();
  const auto& log = trainer.log();
  std::vector<double> rewards;
  for (const auto& r : log) rewards.push_back(r.total_reward);
  write_line_plot(out / "train_curve.svg", "Episode reward", {{"raw", rewards, {}}, {"median 100", median_filter(rewards, 100), {}}},
                  "episode", "total reward");
  const int eval_episodes = get_or(cfg, "eval_episodes", 0);
  if (eval_episodes > 0) {
    const auto ev = evaluate_policy(trainer.agent().actor, seqs.front(), reward, eval_episodes, tc.seed);
    std::ofstream f(out / "eval_frames.csv");
    f << "index,mean_intensity\n";
    for (std::size_t i = 0; i < ev.frame_means.size(); ++i) f << i << "," << ev.frame_means[i] << "\n";
  }
  std::cout << "trained " << trainer.episode() << " episodes, " << trainer.steps() << " steps\n";
  return 0;
}

int cmd_eval(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "sequence", "scene", "controller", "reward", "reward_config", "initial_exposure_us",
                   "features", "output"});
  require<std::uint64_t>(cfg, "seed");
  const fs::path out = output_dir(cfg, out_override);
  const auto seq = sequence_from(cfg, "sequence", "scene", "switching");
  const RewardFn reward = reward_from(cfg, *seq);
  auto controller = make_controller(parse_controller(cfg.contains("controller") ? cfg.at("controller") : Json("builtin")));
  EvalOptions eo;
  eo.initial_exposure_us = get_or(cfg, "initial_exposure_us", eo.initial_exposure_us);
  eo.features = get_or(cfg, "features", eo.features);
  if (cfg.contains("reward_config")) eo.reward_config = parse_reward_config(cfg.at("reward_config"));
  write_manifest(out, "eval", cfg);
  const auto res = run_eval(*seq, *controller, reward, eo);
  write_metrics_csv(out / "metrics.csv", res.rows);
  Json summary{{"controller", controller->name()},
               {"frames", res.summary.frames},
               {"mean_n_match", res.summary.mean_match},
               {"min_n_match", res.summary.min_match},
               {"total_reward", res.summary.total_reward},
               {"saturation_time_fraction", res.summary.saturation_time_fraction}};
  std::ofstream(out / "summary.json") << summary.dump(2) << "\n";
  std::vector<double> means;
  for (const auto& r : res.rows) means.push_back(r.mean_intensity);
  write_line_plot(out / "trace.svg", "Mean intensity", {{controller->name(), means, {}}}, "frame", "mean intensity");
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_react(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "sequence", "scene", "controllers", "events", "initial_exposure_us", "output"});
  require<std::uint64_t>(cfg, "seed");
  const fs::path out = output_dir(cfg, out_override);
  const Json scene_cfg = cfg.contains("scene") ? cfg.at("scene") : Json("react");
  std::vector<int> events;
  if (cfg.contains("events")) {
    events = require<std::vector<int>>(cfg, "events");
  } else if (!cfg.contains("sequence")) {
    for (const auto& e : parse_scene(scene_cfg).light_events) events.push_back(e.frame);
  }
  if (events.empty()) throw ConfigError("config key 'events' is required when replaying a recorded sequence");
  const auto seq = sequence_from(cfg, "sequence", "scene", scene_cfg);
  std::vector<std::unique_ptr<Controller>> owned;
  std::vector<Controller*> ptrs;
  const Json list = cfg.contains("controllers") ? cfg.at("controllers") : Json{"builtin", "gradient", "oneshot"};
  for (const auto& c : list) {
    owned.push_back(make_controller(parse_controller(c)));
    ptrs.push_back(owned.back().get());
  }
  write_manifest(out, "react-test", cfg);
  const auto res = run_react_test(*seq, events, ptrs, get_or(cfg, "initial_exposure_us", 1000.0));
  write_react_outputs(out, events, res);
  for (const auto& r : res) {
    std::cout << r.controller;
    for (std::size_t i = 0; i < events.size(); ++i)
      std::cout << "  event@" << events[i] << ": " << r.recoveries[i].frames << (r.recoveries[i].censored ? "+" : "");
    std::cout << "\n";
  }
  return 0;
}

int cmd_ablation(const Json& cfg, const std::string& out_override) {
  check_keys(cfg, {"seed", "sequence", "sequences", "scene", "eval_sequence", "eval_scene", "reward", "reward_config",
                   "sac", "network", "episodes", "max_steps", "checkpoint_every", "seeds", "eval_episodes",
                   "eval_episode_length", "filter_window", "output"});
  AblationOptions ao;
  ao.train = parse_train_config(cfg);
  ao.seeds = get_or(cfg, "seeds", ao.seeds);
  ao.eval_episodes = get_or(cfg, "eval_episodes", ao.eval_episodes);
  ao.eval_episode_length = get_or(cfg, "eval_episode_length", ao.eval_episode_length);
  ao.filter_window = get_or(cfg, "filter_window", ao.filter_window);
  const fs::path out = output_dir(cfg, out_override);
  const auto seqs = training_sequences(cfg);
  const auto eval_seq = sequence_from(cfg, "eval_sequence", "eval_scene", "react");
  const RewardFn reward = reward_from(cfg, *seqs.front());
  write_manifest(out, "ablation", cfg);
  const auto res = run_ablation(seqs, eval_seq, reward, ao, out);
  std::cout << "median eval-reward slope: augmented " << res.median_slope_aug << ", plain " << res.median_slope_plain
            << "\n";
  return 0;
}

int dispatch(const std::string& command, const Json& cfg, const std::string& out);

int cmd_replay(const std::string& manifest, const std::string& out_override) {
  const Json m = load_json(manifest);
  const auto command = require<std::string>(m, "command");
  if (command == "replay") throw ConfigError("manifest key 'command' cannot be replay");
  if (m.contains("version") && m.at("version") != kArtifactVersion)
    spdlog::warn("manifest was written by {}, this is {}", m.at("version").dump(), kArtifactVersion);
  return dispatch(command, require<Json>(m, "config"), out_override);
}

int dispatch(const std::string& command, const Json& cfg, const std::string& out) {
  if (command == "calibrate-crf") return cmd_calibrate(cfg, out);
  if (command == "gen-scene") return cmd_gen_scene(cfg, out);
  if (command == "train") return cmd_train(cfg, out);
  if (command == "eval") return cmd_eval(cfg, out);
  if (command == "react-test") return cmd_react(cfg, out);
  if (command == "ablation") return cmd_ablation(cfg, out);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  // Batch matrices are several MB; keep them in the heap between updates.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  if (const char* level = std::getenv("EXPO_LOG")) spdlog::set_level(spdlog::level::from_str(level));

  CLI::App app{"Exposure-control lab: simulator, rewards, SAC training and baseline controllers"};
  app.require_subcommand(1);
  std::string config_path, out_override, manifest_path;
  const char* names[] = {"calibrate-crf", "gen-scene", "train", "eval", "react-test", "ablation"};
  const char* help[] = {"fit a camera response from bracketed sequences", "render a synthetic bracketed sequence",
                        "train a SAC exposure agent", "closed-loop evaluation of one controller",
                        "light-switch reaction test over several controllers",
                        "train with and without augmentation and compare eval curves"};
  for (int i = 0; i < 6; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("-c,--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_override, "output location (overrides the config's 'output')");
  }
  auto* replay = app.add_subcommand("replay", "re-run a manifest.json written by an earlier run");
  replay->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  replay->add_option("-o,--out", out_override, "output location");

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (replay->parsed()) return cmd_replay(manifest_path, out_override);
    const std::string command = app.get_subcommands().front()->get_name();
    return dispatch(command, load_json(config_path), out_override);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
