#include "expo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "expo/plot.hpp"

namespace expo {

namespace fs = std::filesystem;

double saturation_fraction(const Image& img) {
  std::size_t n = 0;
  for (auto v : img.pixels()) n += (v == 0 || v == 255);
  return img.size() ? static_cast<double>(n) / img.size() : 0.0;
}

EvalSummary summarize(const std::vector<MetricsRow>& rows) {
  EvalSummary s;
  s.frames = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  s.min_match = rows.front().n_match;
  double match = 0.0, sat = 0.0;
  for (const auto& r : rows) {
    match += r.n_match;
    s.min_match = std::min(s.min_match, r.n_match);
    s.total_reward += r.reward;
    sat += r.saturation;
  }
  s.mean_match = match / rows.size();
  s.saturation_time_fraction = sat / rows.size();
  return s;
}

EvalOutput run_eval(const BracketedSequence& seq, Controller& controller, const RewardFn& reward,
                    const EvalOptions& options) {
  validate(seq);
  const AugmentationSpec identity;
  EvalOutput out;
  controller.reset();
  double e = std::clamp(options.initial_exposure_us, kMinComposite, kMaxComposite);
  Image prev;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Image img = observe_at(seq, identity, i, e);
    const Image& before = i == 0 ? img : prev;
    MetricsRow row;
    row.frame = static_cast<int>(i);
    const auto alloc = allocate(e);
    row.time_us = alloc.time_us;
    row.gain_db = alloc.gain_db;
    row.composite_us = e;
    row.mean_intensity = img.mean();
    row.saturation = saturation_fraction(img);
    if (options.features) {
      const auto counts = count_features(img, before, options.reward_config);
      row.n_detect = counts.detected;
      row.n_match = i == 0 ? 0 : counts.matched;
    }
    std::optional<RigidPose> gt;
    if (seq.gt_poses) gt = i == 0 ? RigidPose{} : augmented_relative_pose(seq, identity, i - 1, i);
    if (reward) row.reward = reward(StepContext{img, before, gt});
    try {
      e = controller.next_exposure(img, seq.frames[i], seq.crf, e);
    } catch (const std::exception& ex) {
      spdlog::warn("controller {} failed at frame {}: {}", controller.name(), i, ex.what());
      row.controller_failed = true;
    }
    out.rows.push_back(row);
    prev = img;
  }
  out.summary = summarize(out.rows);
  return out;
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  out << kMetricsHeader << "\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%.9g,%d\n", r.frame, r.time_us, r.gain_db,
                  r.composite_us, r.mean_intensity, r.saturation, r.n_detect, r.n_match, r.reward,
                  r.controller_failed ? 1 : 0);
    out << buf;
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Recovery frames_to_recover(const std::vector<double>& means, int event, const RecoveryOptions& o) {
  if (event < o.baseline_window || event >= static_cast<int>(means.size()))
    throw DomainError("event frame leaves no room for a baseline");
  double base = 0.0;
  for (int i = event - o.baseline_window; i < event; ++i) base += means[i];
  base /= o.baseline_window;
  auto within = [&](int k) { return std::abs(means[k] - base) <= o.tolerance * base; };
  const int n = static_cast<int>(means.size());
  for (int k = event; k - event < o.censor && k + o.consecutive <= n; ++k) {
    bool ok = true;
    for (int j = 0; j < o.consecutive && ok; ++j) ok = within(k + j);
    if (ok) return {k - event, false};
  }
  return {o.censor, true};
}

std::vector<ReactResult> run_react_test(const BracketedSequence& seq, const std::vector<int>& event_frames,
                                        const std::vector<Controller*>& controllers, double initial_exposure_us,
                                        const RecoveryOptions& options) {
  if (controllers.size() < 2) throw ConfigError("react test needs at least two controllers");
  std::vector<ReactResult> out;
  for (Controller* c : controllers) {
    EvalOptions eo;
    eo.initial_exposure_us = initial_exposure_us;
    eo.features = false;
    const auto run = run_eval(seq, *c, nullptr, eo);
    ReactResult r;
    r.controller = c->name();
    for (const auto& row : run.rows) {
      r.means.push_back(row.mean_intensity);
      r.exposures.push_back(row.composite_us);
    }
    for (int f : event_frames) r.recoveries.push_back(frames_to_recover(r.means, f, options));
    out.push_back(std::move(r));
  }
  return out;
}

void write_react_outputs(const fs::path& dir, const std::vector<int>& event_frames,
                         const std::vector<ReactResult>& results, const std::string& tag) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / ("recovery" + tag + ".csv"));
    out << "controller,event_frame,frames_to_recover,censored\n";
    for (const auto& r : results) {
      for (std::size_t i = 0; i < event_frames.size(); ++i) {
        out << r.controller << "," << event_frames[i] << ",";
        if (r.recoveries[i].censored) out << r.recoveries[i].frames << "+,1\n";
        else out << r.recoveries[i].frames << ",0\n";
      }
    }
  }
  {
    std::ofstream out(dir / ("trace" + tag + ".csv"));
    out << "frame";
    for (const auto& r : results) out << "," << r.controller << "_mean," << r.controller << "_exposure_us";
    out << "\n";
    const std::size_t n = results.empty() ? 0 : results.front().means.size();
    char buf[64];
    for (std::size_t i = 0; i < n; ++i) {
      out << i;
      for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), ",%.4f,%.4f", r.means[i], r.exposures[i]);
        out << buf;
      }
      out << "\n";
    }
  }
  std::vector<Series> series;
  for (const auto& r : results) series.push_back({r.controller, r.means, {}});
  write_line_plot(dir / ("trace" + tag + ".svg"), "Mean intensity through light switches", series, "frame",
                  "mean intensity");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> median_filter(const std::vector<double>& values, int window) {
  if (window < 1) throw DomainError("median filter window must be >= 1");
  const int n = static_cast<int>(values.size());
  const int before = window / 2;
  const int after = window - 1 - before;
  std::vector<double> out(n);
  std::vector<double> buf;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - before), hi = std::min(n - 1, i + after);
    buf.assign(values.begin() + lo, values.begin() + hi + 1);
    out[i] = median(buf);
  }
  return out;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) throw DomainError("slope undefined for constant x");
  return sxy / sxx;
}

AblationResult run_ablation(const std::vector<std::shared_ptr<const BracketedSequence>>& train_sequences,
                            std::shared_ptr<const BracketedSequence> eval_sequence, const RewardFn& reward,
                            const AblationOptions& options, const fs::path& out_dir) {
  AblationResult result;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  std::vector<double> slopes_aug, slopes_plain;
  for (const auto seed : options.seeds) {
    for (const bool augment : {true, false}) {
      AblationArm arm;
      arm.seed = seed;
      arm.augment = augment;
      TrainConfig tc = options.train;
      tc.seed = seed;
      tc.augment = augment;
      Trainer trainer(train_sequences, reward, tc);
      trainer.set_checkpoint_hook([&](int episode, const SacAgent<float>& agent) {
        const auto ev = evaluate_policy(agent.actor, eval_sequence, reward, options.eval_episodes, 7777,
                                        options.eval_episode_length);
        double total = 0.0;
        for (double r : ev.episode_rewards) total += r;
        arm.checkpoint_episodes.push_back(episode);
        arm.eval_rewards.push_back(total / ev.episode_rewards.size());
        spdlog::info("ablation seed {} augment {} episode {} eval {:.3f}", seed, augment, episode,
                     arm.eval_rewards.back());
      });
      trainer.run();
      for (const auto& row : trainer.log()) arm.train_rewards.push_back(row.total_reward);
      arm.slope = arm.eval_rewards.size() >= 2 ? ls_slope(arm.checkpoint_episodes, arm.eval_rewards) : 0.0;
      (augment ? slopes_aug : slopes_plain).push_back(arm.slope);
      result.arms.push_back(std::move(arm));
    }
  }
  result.median_slope_aug = median(slopes_aug);
  result.median_slope_plain = median(slopes_plain);

  if (!out_dir.empty()) {
    std::ofstream ev(out_dir / "eval_curves.csv");
    ev << "seed,augment,episode,eval_reward\n";
    std::ofstream tr(out_dir / "train_curves.csv");
    tr << "seed,augment,episode,raw_reward,filtered_reward\n";
    std::vector<Series> plot;
    for (const auto& arm : result.arms) {
      for (std::size_t i = 0; i < arm.eval_rewards.size(); ++i)
        ev << arm.seed << "," << arm.augment << "," << arm.checkpoint_episodes[i] << "," << arm.eval_rewards[i]
           << "\n";
      const auto filtered = median_filter(arm.train_rewards, options.filter_window);
      for (std::size_t i = 0; i < filtered.size(); ++i)
        tr << arm.seed << "," << arm.augment << "," << i + 1 << "," << arm.train_rewards[i] << "," << filtered[i]
           << "\n";
      plot.push_back({"seed " + std::to_string(arm.seed) + (arm.augment ? " aug" : " plain"), filtered, {}});
    }
    std::ofstream sm(out_dir / "slopes.csv");
    sm << "arm,median_slope\naugmented," << result.median_slope_aug << "\nplain," << result.median_slope_plain
       << "\n";
    write_line_plot(out_dir / "train_curves.svg", "Episode reward (median filtered)", plot, "episode", "reward");
  }
  return result;
}

}  // namespace expo
