#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "expo/config.hpp"
#include "expo/experiments.hpp"
#include "expo/sequence_io.hpp"
#include "test_util.hpp"

using namespace expo;
namespace fs = std::filesystem;

namespace {

BracketedSequence uniform_sequence(int frames, std::uint8_t level_at_1000us, int w = 64, int h = 48) {
  BracketedSequence seq;
  seq.crf = CameraResponse::linear();
  for (int f = 0; f < frames; ++f) {
    BracketedFrame fr;
    for (int k = 0; k < 5; ++k) {
      const double t = kBracketLadderUs[k];
      const double v = std::clamp(std::round(level_at_1000us * t / 1000.0), 1.0, 255.0);
      fr.images[k] = Image(w, h, static_cast<std::uint8_t>(v), Exposure{t, 0});
    }
    fr.timestamp = f / 10.0;
    seq.frames.push_back(std::move(fr));
  }
  return seq;
}

SceneSpec tiny_scene(int frames) {
  SceneSpec s = react_scene_spec(frames);
  s.rectangles = 150;
  s.light_events.clear();
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Run {
  int code = -1;
  std::string output;
};

Run lab(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli_output.txt";
  const std::string cmd = std::string(EXPO_LAB) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

TrainConfig small_train_config() {
  TrainConfig tc;
  tc.network.convs = {{4, 8, 4}, {4, 4, 2}};
  tc.network.hidden = 16;
  tc.sac.episode_len = 8;
  tc.sac.warmup = 12;
  tc.sac.batch = 8;
  tc.sac.buffer = 500;
  tc.sac.update_period_frames = 4;
  tc.sac.updates_per_period = 2;
  tc.sac.lr = 1e-3;
  tc.sac.alpha_lr = 1e-3;
  tc.seed = 21;
  return tc;
}

}  // namespace

TEST(SequenceIo, RoundTrip) {
  const auto dir = test::temp_dir("seq_rt");
  BracketedSequence seq = generate_sequence(4, tiny_scene(6));
  ASSERT_TRUE(seq.gt_poses.has_value());
  save_sequence(seq, dir);
  const auto back = load_sequence(dir);
  ASSERT_EQ(back.size(), seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f)
    for (int k = 0; k < 5; ++k) {
      EXPECT_TRUE(back.frames[f].images[k].same_pixels(seq.frames[f].images[k]));
      EXPECT_DOUBLE_EQ(back.frames[f].images[k].exposure().composite(), kBracketLadderUs[k]);
    }
  ASSERT_TRUE(back.gt_poses.has_value());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    EXPECT_LT(((*back.gt_poses)[f].rotation - (*seq.gt_poses)[f].rotation).norm(), 1e-12);
    EXPECT_LT(((*back.gt_poses)[f].translation - (*seq.gt_poses)[f].translation).norm(), 1e-12);
  }
  for (int i = 0; i < 256; ++i) EXPECT_NEAR(back.crf.table()[i], seq.crf.table()[i], 1e-9);
  fs::remove_all(dir);
}

TEST(SequenceIo, RejectsBadInput) {
  const auto dir = test::temp_dir("seq_bad");
  save_sequence(generate_sequence(5, tiny_scene(5)), dir);

  auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
  const auto good_meta = meta;
  meta["bracket_exposures_us"] = {50, 200, 1000, 5000, 25000};
  write_text(dir / "meta.json", meta.dump());
  EXPECT_THROW(load_sequence(dir), LoadError);
  write_text(dir / "meta.json", good_meta.dump());

  const std::string poses = slurp(dir / "poses.csv");
  std::string broken = poses;
  const auto row3 = broken.find("\n2,") + 3;
  broken.replace(row3, 1, "3");  // qw of frame 2 no longer makes a unit quaternion
  write_text(dir / "poses.csv", broken);
  try {
    load_sequence(dir);
    ADD_FAILURE() << "non-unit quaternion accepted";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
  }
  write_text(dir / "poses.csv", poses);

  const fs::path victim = frame_path(dir, 3, 2);
  fs::rename(victim, dir / "moved.png");
  try {
    load_sequence(dir);
    ADD_FAILURE() << "missing frame accepted";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find(victim.filename().string()), std::string::npos) << e.what();
  }
  fs::rename(dir / "moved.png", victim);

  fs::remove(dir / "poses.csv");
  auto m2 = good_meta;
  m2.erase("poses_file");
  write_text(dir / "meta.json", m2.dump());
  const auto no_gt = load_sequence(dir);
  EXPECT_FALSE(no_gt.gt_poses.has_value());
  EXPECT_EQ(no_gt.size(), 5u);
  fs::remove_all(dir);
}

TEST(MedianFilter, ConstantAndLength) {
  const std::vector<double> c(37, 4.25);
  EXPECT_EQ(median_filter(c, 10), c);
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = std::sin(i * 0.1) + (i % 7 == 0 ? 50.0 : 0.0);
  const auto m = median_filter(v, 100);
  ASSERT_EQ(m.size(), v.size());
  // Spikes on one sample in seven never win a median.
  for (double x : m) EXPECT_LT(x, 2.0);
  EXPECT_EQ(median_filter({3.0, 1.0, 2.0}, 3)[1], 2.0);
}

TEST(Stats, SlopeAndMedian) {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1, 3, 5, 7, 9};
  EXPECT_NEAR(ls_slope(x, y), 2.0, 1e-12);
  EXPECT_NEAR(ls_slope(x, {2, 2, 2, 2, 2}), 0.0, 1e-12);
  EXPECT_NEAR(ls_slope({0, 1, 2, 3}, {0, 0, 1, 1}), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(median({5, 1, 3}), 3.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
}

TEST(Recovery, SyntheticTraces) {
  // Flat at 120, drops at frame 20, back inside 15% from frame 27 on.
  std::vector<double> m(60, 120.0);
  for (int i = 20; i < 27; ++i) m[i] = 10.0 + 10.0 * (i - 20);
  EXPECT_EQ(frames_to_recover(m, 20).frames, 7);
  EXPECT_FALSE(frames_to_recover(m, 20).censored);

  // A single in-band frame followed by a dip does not count.
  m[23] = 118.0;
  EXPECT_EQ(frames_to_recover(m, 20).frames, 7);

  // No drop at all.
  std::vector<double> flat(40, 80.0);
  EXPECT_EQ(frames_to_recover(flat, 15).frames, 0);

  // Never recovers.
  std::vector<double> dark(200, 120.0);
  for (int i = 50; i < 200; ++i) dark[i] = 5.0;
  const auto r = frames_to_recover(dark, 50);
  EXPECT_TRUE(r.censored);
  EXPECT_EQ(r.frames, 100);

  EXPECT_THROW(frames_to_recover(flat, 3), DomainError);
}

TEST(Eval, UniformMidGrayBuiltin) {
  const auto seq = uniform_sequence(12, 128);
  ControllerConfig cc;
  auto ctl = make_controller(cc);
  const auto out = run_eval(seq, *ctl, make_reward(RewardKind::kStat));
  ASSERT_EQ(out.rows.size(), 12u);
  for (const auto& r : out.rows) {
    EXPECT_EQ(r.saturation, 0.0);
    EXPECT_NEAR(r.mean_intensity, 128.0, 1.0);
    EXPECT_EQ(r.n_detect, 0);
    EXPECT_FALSE(r.controller_failed);
  }
  EXPECT_EQ(out.summary.saturation_time_fraction, 0.0);
  const auto again = summarize(out.rows);
  EXPECT_EQ(again.frames, 12);
  EXPECT_DOUBLE_EQ(again.total_reward, out.summary.total_reward);
  double total = 0.0;
  for (const auto& r : out.rows) total += r.reward;
  EXPECT_NEAR(out.summary.total_reward, total, 1e-12);
}

TEST(Eval, PoseRewardNeedsTruth) {
  const auto seq = uniform_sequence(6, 128);
  ControllerConfig cc;
  auto ctl = make_controller(cc);
  EXPECT_THROW(run_eval(seq, *ctl, make_reward(RewardKind::kPose)), ConfigError);
}

TEST(Config, UnknownKeyNamed) {
  const auto j = nlohmann::json::parse(R"({"lr": 0.001, "bacth": 32})");
  try {
    parse_sac(j);
    ADD_FAILURE() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bacth"), std::string::npos) << e.what();
  }
  EXPECT_EQ(parse_sac(nlohmann::json::parse(R"({"batch": 32})")).batch, 32);
  EXPECT_THROW(parse_scene(nlohmann::json("office")), ConfigError);
  EXPECT_THROW(parse_sac(nlohmann::json::parse(R"({"tau": 2.0})")), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = test::temp_dir("cli_codes");
  EXPECT_EQ(lab("", dir).code, 2);

  write_text(dir / "broken.json", "{ \"seed\": 1, ");
  EXPECT_EQ(lab("eval -c " + (dir / "broken.json").string(), dir).code, 2);

  write_text(dir / "typo.json", R"({"seed": 1, "output": "x", "sequense": "y"})");
  const auto typo = lab("eval -c " + (dir / "typo.json").string(), dir);
  EXPECT_EQ(typo.code, 2);
  EXPECT_NE(typo.output.find("sequense"), std::string::npos) << typo.output;

  const std::string missing = (dir / "no_such_sequence").string();
  write_text(dir / "train.json",
             nlohmann::json{{"seed", 1}, {"sequence", missing}, {"output", (dir / "out").string()}}.dump());
  const auto train = lab("train -c " + (dir / "train.json").string(), dir);
  EXPECT_EQ(train.code, 1);
  EXPECT_NE(train.output.find(missing), std::string::npos) << train.output;
  fs::remove_all(dir);
}

TEST(Cli, GenSceneDeterministic) {
  const auto dir = test::temp_dir("cli_gen");
  const nlohmann::json scene{{"preset", "react"}, {"frames", 4}, {"rectangles", 120}};
  for (const char* name : {"a", "b"}) {
    const nlohmann::json cfg{{"seed", 7}, {"scene", scene}, {"output", (dir / name).string()}};
    write_text(dir / (std::string(name) + ".json"), cfg.dump());
  }
  ASSERT_EQ(lab("gen-scene -c " + (dir / "a.json").string(), dir).code, 0);
  ASSERT_EQ(lab("gen-scene -c " + (dir / "b.json").string(), dir).code, 0);
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const fs::path other = dir / "b" / fs::relative(entry.path(), dir / "a");
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path();
    ++files;
  }
  EXPECT_EQ(files, 4 * 5 + 3);  // frames, meta.json, crf.txt, poses.csv
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "gen-scene");
  EXPECT_EQ(manifest["seed"], 7);
  fs::remove_all(dir);
}

TEST(Trainer, ZeroEpisodes) {
  const auto dir = test::temp_dir("train_zero");
  auto seq = std::make_shared<const BracketedSequence>(generate_sequence(3, tiny_scene(20)));
  TrainConfig tc = small_train_config();
  tc.episodes = 0;
  Trainer t({seq}, make_reward(RewardKind::kStat), tc, dir);
  t.run();
  EXPECT_TRUE(t.log().empty());
  EXPECT_TRUE(read_train_log(dir / "train_log.csv").empty());
  EXPECT_FALSE(fs::exists(dir / "final.bin"));
  fs::remove_all(dir);
}

TEST(Trainer, ResumeIsExact) {
  const auto dir = test::temp_dir("train_resume");
  auto seq = std::make_shared<const BracketedSequence>(generate_sequence(3, tiny_scene(20)));
  const auto reward = make_reward(RewardKind::kStat);
  TrainConfig tc = small_train_config();
  tc.episodes = 6;
  tc.checkpoint_every = 3;
  tc.save_replay = true;

  Trainer full({seq}, reward, tc, dir / "full");
  full.run();
  ASSERT_EQ(full.log().size(), 6u);
  ASSERT_GT(full.log().back().critic_loss, 0.0);  // updates happened after the checkpoint
  ASSERT_TRUE(fs::exists(dir / "full" / "checkpoint_000003.bin.replay"));

  Trainer resumed({seq}, reward, tc, dir / "resumed");
  resumed.resume(dir / "full" / "checkpoint_000003.bin");
  EXPECT_EQ(resumed.episode(), 3);
  resumed.run();
  ASSERT_EQ(resumed.log().size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto& a = full.log()[3 + i];
    const auto& b = resumed.log()[i];
    EXPECT_EQ(a.episode, b.episode);
    EXPECT_EQ(a.steps, b.steps);
    EXPECT_EQ(a.total_reward, b.total_reward);
    EXPECT_EQ(a.critic_loss, b.critic_loss);
    EXPECT_EQ(a.actor_loss, b.actor_loss);
    EXPECT_EQ(a.alpha, b.alpha);
  }
  // Written logs agree byte for byte after the header and the first three rows.
  const auto rows_full = read_train_log(dir / "full" / "train_log.csv");
  const auto rows_res = read_train_log(dir / "resumed" / "train_log.csv");
  ASSERT_EQ(rows_res.size(), 3u);
  EXPECT_EQ(rows_full[5].total_reward, rows_res[2].total_reward);
  fs::remove_all(dir);
}
