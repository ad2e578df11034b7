#include "expo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace expo {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label) {
  constexpr double W = 800, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double x = s.x.empty() ? static_cast<double>(i) : s.x[i];
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ofstream out(path);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\">\n", W, H);
  out << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">", L);
  out << buf << escape(title) << "</text>\n";
  std::snprintf(buf, sizeof(buf),
                "<path d=\"M%g %g L%g %g L%g %g\" stroke=\"black\" fill=\"none\"/>\n", L, T, L, H - B, W - R, H - B);
  out << buf;
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">%.4g</text>\n",
                  L - 6, py(yv) + 4, yv);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">%.4g</text>\n",
                  px(xv), H - B + 16, xv);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">",
                (L + W - R) / 2, H - 12);
  out << buf << escape(x_label) << "</text>\n";
  std::snprintf(buf, sizeof(buf),
                "<text transform=\"translate(16 %g) rotate(-90)\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">",
                (T + H - B) / 2);
  out << buf << escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      const double x = series[s].x.empty() ? static_cast<double>(i) : series[s].x[i];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(x), py(series[s].y[i]));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\" fill=\"%s\">", W - R + 10,
                  T + 18.0 * s + 10, color);
    out << buf << escape(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace expo
