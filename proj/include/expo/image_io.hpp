#pragma once

#include <filesystem>

#include "expo/photometry.hpp"

namespace expo {

// 8-bit grayscale PNG. Exposure metadata is not stored in the file.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Image& img);

}  // namespace expo
