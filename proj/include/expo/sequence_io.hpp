#pragma once

#include <filesystem>

#include "expo/scene.hpp"

namespace expo {

// Directory layout:
//   meta.json              width, height, bracket_exposures_us, frame_count,
//                          crf_file, poses_file (optional), intrinsics, fps
//   frames/NNNNNN_K.png    8-bit gray, K = bracket slot 0..4
//   poses.csv              frame,qw,qx,qy,qz,tx,ty,tz (world_from_camera)
void save_sequence(const BracketedSequence& seq, const std::filesystem::path& dir);

// Throws LoadError naming the offending file or row.
BracketedSequence load_sequence(const std::filesystem::path& dir);

std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t frame, int slot);

}  // namespace expo
