#include "expo/orb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace expo {

namespace {

constexpr int kHalfPatch = 15;
constexpr int kEdge = 19;
constexpr int kPatternRadius = 13;

struct Level {
  int width = 0;
  int height = 0;
  float scale = 1.0f;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> blurred;

  int at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  int blurred_at(int x, int y) const { return blurred[static_cast<std::size_t>(y) * width + x]; }
};

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr std::array<std::array<int, 2>, 16> kCircle = {{{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
                                                         {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}}};

std::vector<std::uint8_t> resize_bilinear(const std::vector<std::uint8_t>& src, int sw, int sh, int dw, int dh) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(dw) * dh);
  const double fx = static_cast<double>(sw) / dw;
  const double fy = static_cast<double>(sh) / dh;
  for (int y = 0; y < dh; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, sh - 1.0);
    const int y0 = std::min(static_cast<int>(sy), sh - 1);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double ay = sy - y0;
    for (int x = 0; x < dw; ++x) {
      const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, sw - 1.0);
      const int x0 = std::min(static_cast<int>(sx), sw - 1);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double ax = sx - x0;
      const double v = (1 - ay) * ((1 - ax) * src[y0 * sw + x0] + ax * src[y0 * sw + x1]) +
                       ay * ((1 - ax) * src[y1 * sw + x0] + ax * src[y1 * sw + x1]);
      out[static_cast<std::size_t>(y) * dw + x] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

// Separable 7-tap Gaussian, sigma 2, replicated borders.
std::vector<std::uint8_t> gaussian_blur(const std::vector<std::uint8_t>& src, int w, int h) {
  std::array<double, 7> k{};
  double sum = 0.0;
  for (int i = 0; i < 7; ++i) {
    k[i] = std::exp(-(i - 3) * (i - 3) / 8.0);
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 7; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + std::clamp(x + i - 3, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<std::uint8_t> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 7; ++i) acc += k[i] * tmp[static_cast<std::size_t>(std::clamp(y + i - 3, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(std::lround(acc));
    }
  }
  return out;
}

// Largest threshold for which (x, y) is a FAST-9 corner; 0 if it is not one
// at `threshold`.
int fast_score(const Level& lv, int x, int y, int threshold) {
  const int c = lv.at(x, y);
  std::array<int, 16> d{};
  int bright = 0;
  int dark = 0;
  for (int k = 0; k < 16; k += 4) {
    const int v = lv.at(x + kCircle[k][0], y + kCircle[k][1]) - c;
    bright += v > threshold;
    dark += v < -threshold;
  }
  if (bright < 2 && dark < 2) return 0;
  for (int k = 0; k < 16; ++k) d[k] = lv.at(x + kCircle[k][0], y + kCircle[k][1]) - c;
  int best = 0;
  for (int start = 0; start < 16; ++start) {
    int min_b = std::numeric_limits<int>::max();
    int min_d = std::numeric_limits<int>::max();
    for (int j = 0; j < 9; ++j) {
      const int v = d[(start + j) & 15];
      min_b = std::min(min_b, v);
      min_d = std::min(min_d, -v);
    }
    best = std::max({best, min_b, min_d});
  }
  return best > threshold ? best : 0;
}

float harris_response(const Level& lv, int x, int y) {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      const int px = x + dx;
      const int py = y + dy;
      const double gx = (lv.at(px + 1, py - 1) + 2 * lv.at(px + 1, py) + lv.at(px + 1, py + 1)) -
                        (lv.at(px - 1, py - 1) + 2 * lv.at(px - 1, py) + lv.at(px - 1, py + 1));
      const double gy = (lv.at(px - 1, py + 1) + 2 * lv.at(px, py + 1) + lv.at(px + 1, py + 1)) -
                        (lv.at(px - 1, py - 1) + 2 * lv.at(px, py - 1) + lv.at(px + 1, py - 1));
      sxx += gx * gx;
      syy += gy * gy;
      sxy += gx * gy;
    }
  }
  const double scale = 1.0 / (4.0 * 49.0 * 255.0);
  sxx *= scale * scale;
  syy *= scale * scale;
  sxy *= scale * scale;
  return static_cast<float>(sxx * syy - sxy * sxy - 0.04 * (sxx + syy) * (sxx + syy));
}

float intensity_centroid_angle(const Level& lv, int x, int y) {
  double m10 = 0.0;
  double m01 = 0.0;
  for (int dy = -kHalfPatch; dy <= kHalfPatch; ++dy) {
    const int span = static_cast<int>(std::sqrt(static_cast<double>(kHalfPatch * kHalfPatch - dy * dy)));
    for (int dx = -span; dx <= span; ++dx) {
      const int v = lv.at(x + dx, y + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  return static_cast<float>(std::atan2(m01, m10));
}

struct PatternPair {
  float x1, y1, x2, y2;
};

// Seeded isotropic-Gaussian test pairs (sigma = 31/5), clipped so that any
// rotation keeps them inside the patch.
const std::array<PatternPair, 256>& brief_pattern() {
  static const std::array<PatternPair, 256> pattern = [] {
    std::array<PatternPair, 256> p{};
    std::mt19937 rng(0x0b1e7u);
    std::normal_distribution<float> g(0.0f, 31.0f / 5.0f);
    auto draw = [&](float& x, float& y) {
      do {
        x = std::round(g(rng));
        y = std::round(g(rng));
      } while (x * x + y * y > kPatternRadius * kPatternRadius);
    };
    for (auto& pair : p) {
      do {
        draw(pair.x1, pair.y1);
        draw(pair.x2, pair.y2);
      } while (pair.x1 == pair.x2 && pair.y1 == pair.y2);
    }
    return p;
  }();
  return pattern;
}

Descriptor compute_descriptor(const Level& lv, int x, int y, float angle) {
  const float c = std::cos(angle);
  const float s = std::sin(angle);
  Descriptor d;
  const auto& pattern = brief_pattern();
  for (int i = 0; i < 256; ++i) {
    const auto& p = pattern[i];
    const int ax = x + static_cast<int>(std::lround(c * p.x1 - s * p.y1));
    const int ay = y + static_cast<int>(std::lround(s * p.x1 + c * p.y1));
    const int bx = x + static_cast<int>(std::lround(c * p.x2 - s * p.y2));
    const int by = y + static_cast<int>(std::lround(s * p.x2 + c * p.y2));
    if (lv.blurred_at(ax, ay) < lv.blurred_at(bx, by)) d.bits[i >> 6] |= (std::uint64_t{1} << (i & 63));
  }
  return d;
}

struct Candidate {
  int x;
  int y;
  float response;
};

std::vector<Candidate> detect_level(const Level& lv, int budget, const OrbOptions& opt) {
  std::vector<Candidate> kept;
  if (budget <= 0) return kept;
  const int x_lo = kEdge;
  const int y_lo = kEdge;
  const int x_hi = lv.width - kEdge;
  const int y_hi = lv.height - kEdge;
  if (x_hi - x_lo < 8 || y_hi - y_lo < 8) return kept;

  std::vector<int> score(static_cast<std::size_t>(lv.width) * lv.height, 0);
  const int cell_w = (x_hi - x_lo + opt.grid_cols - 1) / opt.grid_cols;
  const int cell_h = (y_hi - y_lo + opt.grid_rows - 1) / opt.grid_rows;
  const int quota = (budget + opt.grid_cols * opt.grid_rows - 1) / (opt.grid_cols * opt.grid_rows);
  std::vector<Candidate> level_pts;

  for (int gy = 0; gy < opt.grid_rows; ++gy) {
    for (int gx = 0; gx < opt.grid_cols; ++gx) {
      const int cx0 = x_lo + gx * cell_w;
      const int cy0 = y_lo + gy * cell_h;
      const int cx1 = std::min(x_hi, cx0 + cell_w);
      const int cy1 = std::min(y_hi, cy0 + cell_h);
      if (cx0 >= cx1 || cy0 >= cy1) continue;
      std::vector<Candidate> cell;
      for (int threshold : {opt.fast_threshold, opt.fast_fallback}) {
        for (int y = cy0; y < cy1; ++y) {
          for (int x = cx0; x < cx1; ++x) score[static_cast<std::size_t>(y) * lv.width + x] = fast_score(lv, x, y, threshold);
        }
        for (int y = cy0; y < cy1; ++y) {
          for (int x = cx0; x < cx1; ++x) {
            const int s = score[static_cast<std::size_t>(y) * lv.width + x];
            if (s == 0) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                if ((dx || dy) && x + dx >= cx0 && x + dx < cx1 && y + dy >= cy0 && y + dy < cy1) {
                  const int o = score[static_cast<std::size_t>(y + dy) * lv.width + x + dx];
                  if (o > s || (o == s && (dy < 0 || (dy == 0 && dx < 0)))) {
                    is_max = false;
                    break;
                  }
                }
              }
            }
            if (is_max) cell.push_back({x, y, harris_response(lv, x, y)});
          }
        }
        if (!cell.empty()) break;
      }
      std::sort(cell.begin(), cell.end(), [](const Candidate& a, const Candidate& b) {
        return a.response > b.response || (a.response == b.response && (a.y < b.y || (a.y == b.y && a.x < b.x)));
      });
      if (static_cast<int>(cell.size()) > quota) cell.resize(static_cast<std::size_t>(quota));
      level_pts.insert(level_pts.end(), cell.begin(), cell.end());
    }
  }
  std::stable_sort(level_pts.begin(), level_pts.end(),
                   [](const Candidate& a, const Candidate& b) { return a.response > b.response; });
  if (static_cast<int>(level_pts.size()) > budget) level_pts.resize(static_cast<std::size_t>(budget));
  return level_pts;
}

}  // namespace

Features detect_features(const Image& img, int max_n, const OrbOptions& options) {
  if (max_n < 1) throw DomainError("max_n must be >= 1");
  Features out;
  if (img.empty()) return out;

  std::vector<Level> levels(static_cast<std::size_t>(options.levels));
  for (int l = 0; l < options.levels; ++l) {
    auto& lv = levels[l];
    lv.scale = static_cast<float>(std::pow(options.scale, l));
    if (l == 0) {
      lv.width = img.width();
      lv.height = img.height();
      lv.pixels.assign(img.pixels().begin(), img.pixels().end());
    } else {
      lv.width = static_cast<int>(std::lround(img.width() / lv.scale));
      lv.height = static_cast<int>(std::lround(img.height() / lv.scale));
      const auto& prev = levels[l - 1];
      lv.pixels = resize_bilinear(prev.pixels, prev.width, prev.height, lv.width, lv.height);
    }
  }

  // Per-level budgets follow a geometric series in 1/scale.
  const double factor = 1.0 / options.scale;
  double per_level = max_n * (1.0 - factor) / (1.0 - std::pow(factor, options.levels));
  std::vector<int> budgets(static_cast<std::size_t>(options.levels));
  int assigned = 0;
  for (int l = 0; l + 1 < options.levels; ++l) {
    budgets[l] = static_cast<int>(std::lround(per_level));
    assigned += budgets[l];
    per_level *= factor;
  }
  budgets.back() = std::max(0, max_n - assigned);

  for (int l = 0; l < options.levels; ++l) {
    auto& lv = levels[l];
    const auto pts = detect_level(lv, budgets[l], options);
    if (pts.empty()) continue;
    lv.blurred = gaussian_blur(lv.pixels, lv.width, lv.height);
    for (const auto& p : pts) {
      Keypoint kp;
      kp.level = l;
      kp.response = p.response;
      kp.orientation = intensity_centroid_angle(lv, p.x, p.y);
      kp.x = std::min(p.x * lv.scale, static_cast<float>(img.width() - 1));
      kp.y = std::min(p.y * lv.scale, static_cast<float>(img.height() - 1));
      out.keypoints.push_back(kp);
      out.descriptors.push_back(compute_descriptor(lv, p.x, p.y, kp.orientation));
    }
  }

  if (static_cast<int>(out.size()) > max_n) {
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.keypoints[a].response > out.keypoints[b].response;
    });
    order.resize(static_cast<std::size_t>(max_n));
    std::sort(order.begin(), order.end());
    Features trimmed;
    for (auto i : order) {
      trimmed.keypoints.push_back(out.keypoints[i]);
      trimmed.descriptors.push_back(out.descriptors[i]);
    }
    out = std::move(trimmed);
  }
  return out;
}

MatchSet match_features(const Features& a, const Features& b, double ratio) {
  MatchSet matches;
  const auto na = a.size();
  const auto nb = b.size();
  if (na == 0 || nb == 0) return matches;

  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> best_a(na, kInf), second_a(na, kInf), arg_a(na, -1);
  std::vector<int> best_b(nb, kInf), second_b(nb, kInf), arg_b(nb, -1);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const int d = hamming(a.descriptors[i], b.descriptors[j]);
      if (d < best_a[i]) {
        second_a[i] = best_a[i];
        best_a[i] = d;
        arg_a[i] = static_cast<int>(j);
      } else if (d < second_a[i]) {
        second_a[i] = d;
      }
      if (d < best_b[j]) {
        second_b[j] = best_b[j];
        best_b[j] = d;
        arg_b[j] = static_cast<int>(i);
      } else if (d < second_b[j]) {
        second_b[j] = d;
      }
    }
  }
  auto passes = [ratio](int best, int second) { return second == kInf || best < ratio * second; };
  for (std::size_t i = 0; i < na; ++i) {
    const int j = arg_a[i];
    if (j < 0 || arg_b[j] != static_cast<int>(i)) continue;
    if (!passes(best_a[i], second_a[i]) || !passes(best_b[j], second_b[j])) continue;
    matches.push_back({static_cast<int>(i), j, best_a[i]});
  }
  return matches;
}

}  // namespace expo
