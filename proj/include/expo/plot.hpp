#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace expo {

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> x;  // empty: 0, 1, 2, ...
};

// Plain SVG line chart; no external renderer needed.
void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label);

}  // namespace expo
