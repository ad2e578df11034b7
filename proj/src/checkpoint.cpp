#include "expo/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "expo/config.hpp"
#include "expo/errors.hpp"

namespace expo {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[] = "EXPOCKPT";
constexpr char kReplayMagic[] = "EXPORPLY";

template <class Rng>
std::string rng_text(const Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

template <class Rng>
void rng_restore(Rng& rng, const std::string& text) {
  std::istringstream s(text);
  s >> rng;
  if (!s) throw LoadError("corrupt RNG state in checkpoint");
}

void write_tensor(std::ostream& out, const std::string& name, const nn::Vec<float>& v) {
  out << name << ' ' << v.size() << '\n';
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  out << '\n';
}

void read_tensor(std::istream& in, const std::string& name, nn::Vec<float>& v, const fs::path& path) {
  std::string got;
  long long n = -1;
  in >> got >> n;
  in.get();
  if (!in || got != name) throw LoadError(path.string() + ": expected tensor '" + name + "', found '" + got + "'");
  if (n != v.size())
    throw LoadError(path.string() + ": tensor '" + name + "' has " + std::to_string(n) + " values, network expects " +
                    std::to_string(v.size()));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  in.get();
  if (!in) throw LoadError(path.string() + ": truncated tensor '" + name + "'");
}

}  // namespace

void save_checkpoint(const SacAgent<float>& agent, const TrainerCounters& counters, const fs::path& path) {
  Json header;
  header["version"] = kCheckpointVersion;
  header["network"] = to_json(agent.spec());
  header["sac"] = to_json(agent.config());
  header["episode"] = counters.episode;
  header["steps"] = counters.steps;
  header["trainer_rng"] = counters.rng_state;
  header["agent_rng"] = rng_text(agent.rng);
  header["log_alpha"] = agent.log_alpha;
  header["updates"] = agent.updates;
  header["adam_steps"] = {agent.actor_opt.steps(), agent.q1_opt.steps(), agent.q2_opt.steps(),
                          agent.alpha_opt.steps()};
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    const std::string h = header.dump();
    out << kMagic << '\n' << h.size() << '\n' << h << '\n';
    write_tensor(out, "actor", agent.actor.params);
    write_tensor(out, "q1", agent.q1.params);
    write_tensor(out, "q2", agent.q2.params);
    write_tensor(out, "q1_target", agent.q1_target.params);
    write_tensor(out, "q2_target", agent.q2_target.params);
    write_tensor(out, "actor_adam_m", agent.actor_opt.m());
    write_tensor(out, "actor_adam_v", agent.actor_opt.v());
    write_tensor(out, "q1_adam_m", agent.q1_opt.m());
    write_tensor(out, "q1_adam_v", agent.q1_opt.v());
    write_tensor(out, "q2_adam_m", agent.q2_opt.m());
    write_tensor(out, "q2_adam_v", agent.q2_opt.v());
    write_tensor(out, "alpha_adam_m", agent.alpha_opt.m());
    write_tensor(out, "alpha_adam_v", agent.alpha_opt.v());
    if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
  }
  fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path, const nn::NetworkSpec* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open checkpoint");
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw LoadError(path.string() + ": not a checkpoint file");
  std::size_t len = 0;
  in >> len;
  in.get();
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  in.get();
  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw LoadError(path.string() + ": bad header: " + e.what());
  }
  LoadedCheckpoint out;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion)
      throw LoadError(path.string() + ": unsupported checkpoint version");
    const auto spec = parse_network(header.at("network"));
    if (expected && !(spec == *expected)) throw LoadError(path.string() + ": network shape does not match");
    const auto sac = parse_sac(header.at("sac"));
    out.agent = std::make_unique<SacAgent<float>>(spec, sac, 0);
    out.counters.episode = header.at("episode").get<int>();
    out.counters.steps = header.at("steps").get<std::int64_t>();
    out.counters.rng_state = header.at("trainer_rng").get<std::string>();
    rng_restore(out.agent->rng, header.at("agent_rng").get<std::string>());
    out.agent->log_alpha = header.at("log_alpha").get<double>();
    out.agent->updates = header.at("updates").get<std::int64_t>();
    const auto steps = header.at("adam_steps").get<std::vector<std::int64_t>>();
    if (steps.size() != 4) throw LoadError(path.string() + ": bad optimizer state");
    out.agent->actor_opt.set_steps(steps[0]);
    out.agent->q1_opt.set_steps(steps[1]);
    out.agent->q2_opt.set_steps(steps[2]);
    out.agent->alpha_opt.set_steps(steps[3]);
  } catch (const Json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  auto& a = *out.agent;
  read_tensor(in, "actor", a.actor.params, path);
  read_tensor(in, "q1", a.q1.params, path);
  read_tensor(in, "q2", a.q2.params, path);
  read_tensor(in, "q1_target", a.q1_target.params, path);
  read_tensor(in, "q2_target", a.q2_target.params, path);
  read_tensor(in, "actor_adam_m", a.actor_opt.m(), path);
  read_tensor(in, "actor_adam_v", a.actor_opt.v(), path);
  read_tensor(in, "q1_adam_m", a.q1_opt.m(), path);
  read_tensor(in, "q1_adam_v", a.q1_opt.v(), path);
  read_tensor(in, "q2_adam_m", a.q2_opt.m(), path);
  read_tensor(in, "q2_adam_v", a.q2_opt.v(), path);
  read_tensor(in, "alpha_adam_m", a.alpha_opt.m(), path);
  read_tensor(in, "alpha_adam_v", a.alpha_opt.v(), path);
  return out;
}

void save_replay(const ReplayBuffer& buffer, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write replay file " + path.string());
    const std::uint64_t n = buffer.size(), head = buffer.cursor(), cap = buffer.capacity();
    out << kReplayMagic << '\n';
    out.write(reinterpret_cast<const char*>(&cap), sizeof(cap));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&head), sizeof(head));
    for (const auto& t : buffer.storage()) {
      out.write(reinterpret_cast<const char*>(t.planes.data()), static_cast<std::streamsize>(t.planes.size()));
      out.write(reinterpret_cast<const char*>(&t.action), sizeof(t.action));
      out.write(reinterpret_cast<const char*>(&t.reward), sizeof(t.reward));
      const std::uint8_t d = t.done ? 1 : 0;
      out.write(reinterpret_cast<const char*>(&d), 1);
    }
    if (!out) throw std::runtime_error("short write on replay file " + path.string());
  }
  fs::rename(tmp, path);
}

void load_replay(ReplayBuffer& buffer, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open replay file");
  std::string magic;
  std::getline(in, magic);
  if (magic != kReplayMagic) throw LoadError(path.string() + ": not a replay file");
  std::uint64_t cap = 0, n = 0, head = 0;
  in.read(reinterpret_cast<char*>(&cap), sizeof(cap));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&head), sizeof(head));
  if (!in || cap != buffer.capacity()) throw LoadError(path.string() + ": replay capacity mismatch");
  std::vector<CompactTransition> data(n);
  for (auto& t : data) {
    t.planes.resize(CompactTransition::kPlanes * Observation::kPlaneSize);
    in.read(reinterpret_cast<char*>(t.planes.data()), static_cast<std::streamsize>(t.planes.size()));
    in.read(reinterpret_cast<char*>(&t.action), sizeof(t.action));
    in.read(reinterpret_cast<char*>(&t.reward), sizeof(t.reward));
    std::uint8_t d = 0;
    in.read(reinterpret_cast<char*>(&d), 1);
    t.done = d != 0;
  }
  if (!in) throw LoadError(path.string() + ": truncated replay file");
  buffer.restore(std::move(data), head);
}

}  // namespace expo
