#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "expo/controllers.hpp"
#include "expo/errors.hpp"
#include "expo/nn.hpp"
#include "expo/rewards.hpp"
#include "expo/sac.hpp"
#include "expo/scene.hpp"
#include "expo/trainer.hpp"

namespace expo {

using Json = nlohmann::json;

// Parse errors name the file; later lookups name the key.
Json load_json(const std::filesystem::path& path);

// Rejects keys outside `allowed`; ctx is the dotted prefix used in messages.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx = "");

template <class T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& ctx = "") {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + ctx + key + "' has the wrong type");
  }
}

template <class T>
T require(const Json& j, const std::string& key, const std::string& ctx = "") {
  if (!j.contains(key)) throw ConfigError("config key '" + ctx + key + "' is required");
  return get_or<T>(j, key, T{}, ctx);
}

SacConfig parse_sac(const Json& j, SacConfig base = {});
Json to_json(const SacConfig& c);

nn::NetworkSpec parse_network(const Json& j);
Json to_json(const nn::NetworkSpec& s);

// Either a preset name ("switching", "react") or an object that may name a
// preset under "preset" and override fields.
SceneSpec parse_scene(const Json& j);

RewardConfig parse_reward_config(const Json& j, RewardConfig base = {});

ControllerConfig parse_controller(const Json& j);

// Training fields of a train config: seed, sac, network, episodes, max_steps,
// checkpoint_every, augment, save_replay. Other keys are left to the caller.
TrainConfig parse_train_config(const Json& j);

}  // namespace expo
