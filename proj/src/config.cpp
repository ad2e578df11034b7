#include "expo/config.hpp"

#include <fstream>

namespace expo {

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("config key '" + (ctx.empty() ? std::string("<root>") : ctx) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown config key '" + ctx + key + "'");
  }
}

SacConfig parse_sac(const Json& j, SacConfig c) {
  const std::string ctx = "sac.";
  check_keys(j, {"lr", "alpha_lr", "batch", "episode_len", "buffer", "warmup", "gamma", "tau", "update_period_frames",
                 "updates_per_period", "target_entropy", "init_alpha"},
             ctx);
  c.lr = get_or(j, "lr", c.lr, ctx);
  c.alpha_lr = get_or(j, "alpha_lr", c.alpha_lr, ctx);
  c.batch = get_or(j, "batch", c.batch, ctx);
  c.episode_len = get_or(j, "episode_len", c.episode_len, ctx);
  c.buffer = get_or(j, "buffer", c.buffer, ctx);
  c.warmup = get_or(j, "warmup", c.warmup, ctx);
  c.gamma = get_or(j, "gamma", c.gamma, ctx);
  c.tau = get_or(j, "tau", c.tau, ctx);
  c.update_period_frames = get_or(j, "update_period_frames", c.update_period_frames, ctx);
  c.updates_per_period = get_or(j, "updates_per_period", c.updates_per_period, ctx);
  c.target_entropy = get_or(j, "target_entropy", c.target_entropy, ctx);
  c.init_alpha = get_or(j, "init_alpha", c.init_alpha, ctx);
  c.validate();
  return c;
}

Json to_json(const SacConfig& c) {
  return {{"lr", c.lr},
          {"alpha_lr", c.alpha_lr},
          {"batch", c.batch},
          {"episode_len", c.episode_len},
          {"buffer", c.buffer},
          {"warmup", c.warmup},
          {"gamma", c.gamma},
          {"tau", c.tau},
          {"update_period_frames", c.update_period_frames},
          {"updates_per_period", c.updates_per_period},
          {"target_entropy", c.target_entropy},
          {"init_alpha", c.init_alpha}};
}

nn::NetworkSpec parse_network(const Json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "default") return {};
    if (name == "miniature") return nn::NetworkSpec::miniature();
    throw ConfigError("config key 'network' names unknown preset '" + name + "'");
  }
  const std::string ctx = "network.";
  check_keys(j, {"in_channels", "in_size", "convs", "hidden"}, ctx);
  nn::NetworkSpec s;
  s.in_channels = get_or(j, "in_channels", s.in_channels, ctx);
  s.in_size = get_or(j, "in_size", s.in_size, ctx);
  s.hidden = get_or(j, "hidden", s.hidden, ctx);
  if (j.contains("convs")) {
    s.convs.clear();
    for (const auto& c : j.at("convs")) {
      if (!c.is_array() || c.size() != 3) throw ConfigError("config key 'network.convs' entries must be [filters, kernel, stride]");
      s.convs.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
    }
  }
  return s;
}

Json to_json(const nn::NetworkSpec& s) {
  Json convs = Json::array();
  for (const auto& c : s.convs) convs.push_back({c.filters, c.kernel, c.stride});
  return {{"in_channels", s.in_channels}, {"in_size", s.in_size}, {"convs", convs}, {"hidden", s.hidden}};
}

SceneSpec parse_scene(const Json& j) {
  auto preset = [](const std::string& name, int frames) {
    if (name == "switching") return switching_scene_spec(frames > 0 ? frames : 520);
    if (name == "react") return react_scene_spec(frames > 0 ? frames : 300);
    throw ConfigError("config key 'scene' names unknown preset '" + name + "'");
  };
  if (j.is_string()) return preset(j.get<std::string>(), 0);
  const std::string ctx = "scene.";
  check_keys(j, {"preset", "frames", "pano_width", "pano_height", "dynamic_range", "mid_irradiance", "windows",
                 "rectangles", "noise_sigma", "crf_gamma", "fps", "light_events", "path"},
             ctx);
  const int frames = get_or(j, "frames", 0, ctx);
  SceneSpec s = preset(get_or<std::string>(j, "preset", "switching", ctx), frames);
  s.pano_width = get_or(j, "pano_width", s.pano_width, ctx);
  s.pano_height = get_or(j, "pano_height", s.pano_height, ctx);
  s.dynamic_range = get_or(j, "dynamic_range", s.dynamic_range, ctx);
  s.mid_irradiance = get_or(j, "mid_irradiance", s.mid_irradiance, ctx);
  s.windows = get_or(j, "windows", s.windows, ctx);
  s.rectangles = get_or(j, "rectangles", s.rectangles, ctx);
  s.noise_sigma = get_or(j, "noise_sigma", s.noise_sigma, ctx);
  s.crf_gamma = get_or(j, "crf_gamma", s.crf_gamma, ctx);
  s.fps = get_or(j, "fps", s.fps, ctx);
  if (j.contains("light_events")) {
    s.light_events.clear();
    for (const auto& e : j.at("light_events")) {
      s.light_events.push_back({require<int>(e, "frame", ctx + "light_events[]."),
                                require<double>(e, "scale", ctx + "light_events[].")});
    }
  }
  if (j.contains("path")) {
    s.path.clear();
    for (const auto& p : j.at("path")) {
      PathPoint pp{require<double>(p, "offset_x", ctx + "path[]."), require<double>(p, "offset_y", ctx + "path[]."), std::nullopt};
      if (p.contains("yaw")) pp.yaw = p.at("yaw").get<double>();
      s.path.push_back(pp);
    }
  }
  return s;
}

RewardConfig parse_reward_config(const Json& j, RewardConfig c) {
  const std::string ctx = "reward_config.";
  check_keys(j, {"w_flk", "w_detect", "w_match", "w_rot", "w_trans", "max_features", "ransac_seed"}, ctx);
  c.w_flk = get_or(j, "w_flk", c.w_flk, ctx);
  c.w_detect = get_or(j, "w_detect", c.w_detect, ctx);
  c.w_match = get_or(j, "w_match", c.w_match, ctx);
  c.w_rot = get_or(j, "w_rot", c.w_rot, ctx);
  c.w_trans = get_or(j, "w_trans", c.w_trans, ctx);
  c.max_features = get_or(j, "max_features", c.max_features, ctx);
  c.ransac_seed = get_or(j, "ransac_seed", c.ransac_seed, ctx);
  if (c.w_flk < 0 || c.w_detect < 0 || c.w_match < 0 || c.w_rot < 0 || c.w_trans < 0)
    throw ConfigError("config key 'reward_config' weights must be >= 0");
  if (c.max_features < 1) throw ConfigError("config key 'reward_config.max_features' must be >= 1");
  return c;
}

ControllerConfig parse_controller(const Json& j) {
  ControllerConfig c;
  if (j.is_string()) {
    c.kind = parse_controller_kind(j.get<std::string>());
    return c;
  }
  const std::string ctx = "controller.";
  check_keys(j, {"kind", "name", "kp", "checkpoint", "metric", "alpha"}, ctx);
  c.kind = parse_controller_kind(require<std::string>(j, "kind", ctx));
  c.name = get_or<std::string>(j, "name", "", ctx);
  c.kp = get_or(j, "kp", c.kp, ctx);
  c.gradient_alpha = get_or(j, "alpha", c.gradient_alpha, ctx);
  c.checkpoint = get_or<std::string>(j, "checkpoint", "", ctx);
  const auto metric = get_or<std::string>(j, "metric", "mean", ctx);
  if (metric == "mean") c.oneshot_metric = OneshotMetric::kMean;
  else if (metric == "gradient") c.oneshot_metric = OneshotMetric::kGradient;
  else throw ConfigError("config key 'controller.metric' must be mean|gradient");
  if (c.kind == ControllerKind::kDrl && c.checkpoint.empty())
    throw ConfigError("config key 'controller.checkpoint' is required for drl controllers");
  return c;
}

TrainConfig parse_train_config(const Json& j) {
  TrainConfig tc;
  tc.seed = require<std::uint64_t>(j, "seed");
  if (j.contains("sac")) tc.sac = parse_sac(j.at("sac"));
  if (j.contains("network")) tc.network = parse_network(j.at("network"));
  tc.episodes = get_or(j, "episodes", tc.episodes);
  tc.max_steps = get_or(j, "max_steps", tc.max_steps);
  tc.checkpoint_every = get_or(j, "checkpoint_every", tc.checkpoint_every);
  tc.augment = get_or(j, "augment", tc.augment);
  tc.save_replay = get_or(j, "save_replay", tc.save_replay);
  return tc;
}

}  // namespace expo
