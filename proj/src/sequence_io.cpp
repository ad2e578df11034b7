#include "expo/sequence_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "expo/errors.hpp"
#include "expo/image_io.hpp"

namespace expo {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path frame_path(const fs::path& dir, std::size_t frame, int slot) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06zu_%d.png", frame, slot);
  return dir / "frames" / name;
}

void save_sequence(const BracketedSequence& seq, const fs::path& dir) {
  validate(seq);
  fs::create_directories(dir / "frames");
  json meta;
  meta["width"] = seq.frames.front().images[0].width();
  meta["height"] = seq.frames.front().images[0].height();
  meta["bracket_exposures_us"] = std::vector<double>(kBracketLadderUs.begin(), kBracketLadderUs.end());
  meta["frame_count"] = seq.size();
  meta["crf_file"] = "crf.txt";
  if (seq.gt_poses) meta["poses_file"] = "poses.csv";
  meta["intrinsics"] = {{"fx", seq.intrinsics.fx}, {"fy", seq.intrinsics.fy},
                        {"cx", seq.intrinsics.cx}, {"cy", seq.intrinsics.cy}};
  meta["fps"] = seq.fps;
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
  seq.crf.save(dir / "crf.txt");
  for (std::size_t f = 0; f < seq.size(); ++f) {
    for (int k = 0; k < 5; ++k) write_png(frame_path(dir, f, k), seq.frames[f].images[k]);
  }
  if (seq.gt_poses) {
    std::ofstream out(dir / "poses.csv");
    out << "frame,qw,qx,qy,qz,tx,ty,tz\n";
    char line[256];
    for (std::size_t f = 0; f < seq.gt_poses->size(); ++f) {
      const auto& p = (*seq.gt_poses)[f];
      Eigen::Quaterniond q(p.rotation);
      q.normalize();
      if (q.w() < 0) q.coeffs() *= -1.0;
      std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f, q.w(), q.x(), q.y(),
                    q.z(), p.translation.x(), p.translation.y(), p.translation.z());
      out << line;
    }
  }
}

namespace {

std::vector<RigidPose> load_poses(const fs::path& file, std::size_t frames) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "frame,qw,qx,qy,qz,tx,ty,tz") throw LoadError(file.string() + ": bad header '" + line + "'");
  std::vector<RigidPose> poses;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw LoadError(file.string() + " row " + std::to_string(row) + ": unparsable value");
    }
    if (v.size() != 8) throw LoadError(file.string() + " row " + std::to_string(row) + ": expected 8 columns");
    if (static_cast<std::size_t>(v[0]) != poses.size())
      throw LoadError(file.string() + " row " + std::to_string(row) + ": frame index out of order");
    Eigen::Quaterniond q(v[1], v[2], v[3], v[4]);
    if (std::abs(q.norm() - 1.0) > 1e-6)
      throw LoadError(file.string() + " row " + std::to_string(row) + ": quaternion not unit norm");
    q.normalize();
    poses.push_back({q.toRotationMatrix(), Vec3(v[5], v[6], v[7])});
  }
  if (poses.size() != frames)
    throw LoadError(file.string() + ": " + std::to_string(poses.size()) + " poses for " + std::to_string(frames) +
                    " frames");
  return poses;
}

}  // namespace

BracketedSequence load_sequence(const fs::path& dir) {
  const fs::path meta_file = dir / "meta.json";
  std::ifstream in(meta_file);
  if (!in) throw LoadError(meta_file.string() + ": cannot open");
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw LoadError(meta_file.string() + ": " + e.what());
  }
  BracketedSequence seq;
  std::size_t count = 0;
  int width = 0, height = 0;
  std::string crf_file;
  try {
    const auto ladder = meta.at("bracket_exposures_us").get<std::vector<double>>();
    if (ladder.size() != kBracketLadderUs.size() ||
        !std::equal(ladder.begin(), ladder.end(), kBracketLadderUs.begin()))
      throw LoadError(meta_file.string() + ": bracket_exposures_us must be [50,200,1000,5000,20000]");
    count = meta.at("frame_count").get<std::size_t>();
    width = meta.at("width").get<int>();
    height = meta.at("height").get<int>();
    crf_file = meta.at("crf_file").get<std::string>();
    const auto& k = meta.at("intrinsics");
    seq.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                      k.at("cy").get<double>()};
    seq.fps = meta.value("fps", 10.0);
  } catch (const json::exception& e) {
    throw LoadError(meta_file.string() + ": " + e.what());
  }
  seq.crf = CameraResponse::load(dir / crf_file);
  seq.frames.resize(count);
  for (std::size_t f = 0; f < count; ++f) {
    for (int k = 0; k < 5; ++k) {
      const fs::path p = frame_path(dir, f, k);
      if (!fs::exists(p)) throw LoadError(p.string() + ": missing frame");
      Image img = read_png(p);
      if (img.width() != width || img.height() != height) throw LoadError(p.string() + ": size disagrees with meta.json");
      img.set_exposure(Exposure{kBracketLadderUs[k], 0.0});
      seq.frames[f].images[k] = std::move(img);
    }
    seq.frames[f].timestamp = static_cast<double>(f) / seq.fps;
  }
  if (meta.contains("poses_file")) {
    const fs::path pf = dir / meta["poses_file"].get<std::string>();
    if (fs::exists(pf)) seq.gt_poses = load_poses(pf, count);
  } else if (fs::exists(dir / "poses.csv")) {
    seq.gt_poses = load_poses(dir / "poses.csv", count);
  }
  validate(seq);
  return seq;
}

}  // namespace expo
