#include "expo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace expo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }

double lattice(std::uint64_t seed, int octave, int ix, int iy) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(octave));
  h = mix_seed(h, static_cast<std::uint32_t>(ix));
  h = mix_seed(h, static_cast<std::uint32_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, int octave, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double tx = x - x0;
  const double ty = y - y0;
  const double sx = tx * tx * (3.0 - 2.0 * tx);
  const double sy = ty * ty * (3.0 - 2.0 * ty);
  const double a = lattice(seed, octave, x0, y0);
  const double b = lattice(seed, octave, x0 + 1, y0);
  const double c = lattice(seed, octave, x0, y0 + 1);
  const double d = lattice(seed, octave, x0 + 1, y0 + 1);
  return (a + (b - a) * sx) + ((c + (d - c) * sx) - (a + (b - a) * sx)) * sy;
}

// Column/row extents of the crop window for a pose.
double effective_offset_x(const PathPoint& pose, const Intrinsics& k) {
  return pose.yaw ? *pose.yaw * k.fx - k.cx : pose.offset_x;
}

}  // namespace

void validate(const BracketedFrame& frame) {
  for (std::size_t k = 0; k < frame.images.size(); ++k) {
    const auto& e = frame.images[k].exposure();
    if (std::abs(e.time_us - kBracketLadderUs[k]) > 1e-9 || e.gain_db != 0.0) {
      throw DomainError("bracket slot " + std::to_string(k) + " does not match the fixed exposure ladder");
    }
    if (frame.images[k].width() != frame.images[0].width() || frame.images[k].height() != frame.images[0].height()) {
      throw DomainError("bracket images differ in size");
    }
  }
}

void validate(const BracketedSequence& seq) {
  if (seq.frames.size() < 2) throw DomainError("a bracketed sequence needs at least 2 frames");
  for (const auto& f : seq.frames) validate(f);
  if (seq.gt_poses && seq.gt_poses->size() != seq.frames.size()) {
    throw DomainError("ground-truth pose count does not match frame count");
  }
}

std::vector<AugmentationSpec> enumerate_augmentations() {
  std::vector<AugmentationSpec> out;
  for (int reversed = 0; reversed < 2; ++reversed) {
    for (int skip = 1; skip <= 3; ++skip) {
      for (int fv = 0; fv < 2; ++fv) {
        for (int fh = 0; fh < 2; ++fh) out.push_back({fh == 1, fv == 1, skip, reversed == 1});
      }
    }
  }
  return out;
}

std::size_t augmented_length(std::size_t frames, const AugmentationSpec& aug) {
  if (frames == 0) return 0;
  return (frames - 1) / static_cast<std::size_t>(aug.skip) + 1;
}

std::size_t augmented_frame_index(std::size_t frames, const AugmentationSpec& aug, std::size_t cursor) {
  if (cursor >= augmented_length(frames, aug)) throw EndOfSequence("cursor beyond augmented sequence length");
  const std::size_t base = cursor * static_cast<std::size_t>(aug.skip);
  return aug.reversed ? frames - 1 - base : base;
}

RigidPose augmented_relative_pose(const BracketedSequence& seq, const AugmentationSpec& aug, std::size_t prev_cursor,
                                  std::size_t cursor) {
  if (!seq.gt_poses) throw ConfigError("sequence has no ground-truth poses");
  const auto& poses = *seq.gt_poses;
  const auto a = augmented_frame_index(seq.size(), aug, prev_cursor);
  const auto b = augmented_frame_index(seq.size(), aug, cursor);
  RigidPose rel = relative_pose(poses[a], poses[b]);
  const Vec3 s(aug.flip_h ? -1.0 : 1.0, aug.flip_v ? -1.0 : 1.0, 1.0);
  const Mat3 flip = s.asDiagonal();
  rel.rotation = flip * rel.rotation * flip;
  rel.translation = flip * rel.translation;
  return rel;
}

Image apply_flips(const Image& img, const AugmentationSpec& aug) {
  if (!aug.flip_h && !aug.flip_v) return img;
  Image out = aug.flip_h ? flip_horizontal(img) : img;
  return aug.flip_v ? flip_vertical(out) : out;
}

Observation::Observation(std::vector<std::uint8_t> data) : data_(std::move(data)) {
  if (data_.size() != kSize) throw DomainError("observation must hold 4 planes of 84x84");
}

std::vector<std::uint8_t> resize_area(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0 || img.empty()) throw DomainError("invalid resize target");
  struct Tap {
    int src;
    double w;
  };
  auto taps = [](int src_len, int dst_len) {
    std::vector<std::vector<Tap>> out(dst_len);
    const double scale = static_cast<double>(src_len) / dst_len;
    for (int d = 0; d < dst_len; ++d) {
      const double lo = d * scale;
      const double hi = (d + 1) * scale;
      for (int s = static_cast<int>(std::floor(lo)); s < std::min(src_len, static_cast<int>(std::ceil(hi))); ++s) {
        const double w = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
        if (w > 0.0) out[d].push_back({s, w / scale});
      }
    }
    return out;
  };
  const auto tx = taps(img.width(), width);
  const auto ty = taps(img.height(), height);
  std::vector<double> rows(static_cast<std::size_t>(img.height()) * width);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& t : tx[x]) acc += t.w * img(t.src, y);
      rows[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (const auto& t : ty[y]) acc += t.w * rows[static_cast<std::size_t>(t.src) * width + x];
      out[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return out;
}

Observation stack_observation(const std::array<std::vector<std::uint8_t>, kObsFrames>& planes) {
  std::vector<std::uint8_t> data;
  data.reserve(Observation::kSize);
  for (const auto& p : planes) {
    if (p.size() != Observation::kPlaneSize) throw DomainError("observation plane must be 84x84");
    data.insert(data.end(), p.begin(), p.end());
  }
  return Observation(std::move(data));
}

double light_scale_at(const SceneSpec& spec, int frame) {
  double scale = 1.0;
  for (const auto& ev : spec.light_events) {
    if (ev.frame <= frame) scale *= ev.scale;
  }
  return scale;
}

IrradianceMap generate_panorama(std::uint64_t seed, const SceneSpec& spec) {
  if (spec.pano_width <= 0 || spec.pano_height <= 0) throw DomainError("panorama must have positive area");
  if (!(spec.dynamic_range >= 1.0)) throw DomainError("dynamic range must be >= 1");
  if (!(spec.mid_irradiance > 0.0)) throw DomainError("mid irradiance must be positive");
  const int w = spec.pano_width;
  const int h = spec.pano_height;
  std::vector<double> v(static_cast<std::size_t>(w) * h, 0.0);

  // Multi-octave value noise.
  double cell = 256.0;
  double amp = 1.0;
  for (int octave = 0; octave < 6; ++octave, cell *= 0.5, amp *= 0.6) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) v[static_cast<std::size_t>(y) * w + x] += amp * value_noise(seed, octave, x / cell, y / cell);
    }
  }

  // Piecewise-constant rectangles give the texture corners to track.
  std::mt19937_64 rng(mix_seed(seed, 0xfeed));
  std::uniform_int_distribution<int> size_dist(6, 72);
  std::uniform_real_distribution<double> delta_dist(-0.6, 0.6);
  for (int r = 0; r < spec.rectangles; ++r) {
    const int rw = size_dist(rng);
    const int rh = size_dist(rng);
    const int x0 = std::uniform_int_distribution<int>(0, std::max(0, w - 1))(rng);
    const int y0 = std::uniform_int_distribution<int>(0, std::max(0, h - 1))(rng);
    const double d = delta_dist(rng);
    for (int y = y0; y < std::min(h, y0 + rh); ++y) {
      for (int x = x0; x < std::min(w, x0 + rw); ++x) v[static_cast<std::size_t>(y) * w + x] += d;
    }
  }

  auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double lo = *lo_it;
  double hi = *hi_it;
  const double span = hi - lo;
  for (auto& x : v) x = span > 0.0 ? 0.85 * (x - lo) / span : 0.0;

  // Bright windows, at least 64x64, pinned at the top of the range.
  if (w >= 64 && h >= 64 && span > 0.0) {
    for (int k = 0; k < std::max(1, spec.windows); ++k) {
      const int ww = std::uniform_int_distribution<int>(64, std::min(w, 160))(rng);
      const int wh = std::uniform_int_distribution<int>(64, std::min(h, 128))(rng);
      const int x0 = std::uniform_int_distribution<int>(0, w - ww)(rng);
      const int y0 = std::uniform_int_distribution<int>(0, h - wh)(rng);
      for (int y = y0; y < y0 + wh; ++y) {
        for (int x = x0; x < x0 + ww; ++x) {
          const bool frame_bar = (x - x0) % 40 < 4 || (y - y0) % 40 < 4;
          v[static_cast<std::size_t>(y) * w + x] = frame_bar ? 0.3 : 0.95 + 0.05 * value_noise(seed, 7, x / 8.0, y / 8.0);
        }
      }
    }
  }

  std::tie(lo_it, hi_it) = std::minmax_element(v.begin(), v.end());
  lo = *lo_it;
  hi = *hi_it;
  const double log_dr = std::log(spec.dynamic_range);
  const double log_mid = std::log(spec.mid_irradiance);
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = hi > lo ? (v[i] - lo) / (hi - lo) : 0.5;
    e[i] = std::exp(log_mid + (t - 0.5) * log_dr);
  }
  if (spec.dynamic_range == 1.0) std::fill(e.begin(), e.end(), spec.mid_irradiance);
  return IrradianceMap(w, h, std::move(e));
}

double heading_of(const PathPoint& pose, const Intrinsics& k) {
  return pose.yaw ? *pose.yaw : (pose.offset_x + k.cx) / k.fx;
}

std::vector<double> project_view(const IrradianceMap& pan, const PathPoint& pose, const Intrinsics& k) {
  const double ox = effective_offset_x(pose, k);
  const double oy = pose.offset_y;
  if (ox < 0.0 || oy < 0.0 || ox + kFrameWidth > pan.width() || oy + kFrameHeight > pan.height()) {
    throw DomainError("crop window outside the panorama");
  }
  // Perspective camera looking at a cylindrical panorama whose column scale
  // is fx pixels per radian.
  std::vector<double> col_x(kFrameWidth);
  std::vector<double> col_norm(kFrameWidth);
  for (int u = 0; u < kFrameWidth; ++u) {
    const double dx = (u - k.cx) / k.fx;
    col_x[u] = ox + k.cx + k.fx * std::atan(dx);
    col_norm[u] = 1.0 / std::sqrt(1.0 + dx * dx);
  }
  std::vector<double> out(static_cast<std::size_t>(kFrameWidth) * kFrameHeight);
  const int pw = pan.width();
  const int ph = pan.height();
  for (int v = 0; v < kFrameHeight; ++v) {
    const double dy = (v - k.cy) / k.fy;
    for (int u = 0; u < kFrameWidth; ++u) {
      const double px = std::clamp(col_x[u], 0.0, pw - 1.0);
      const double py = std::clamp(oy + k.cy + k.fy * dy * col_norm[u], 0.0, ph - 1.0);
      const int x0 = std::min(static_cast<int>(px), pw - 2 < 0 ? 0 : pw - 2);
      const int y0 = std::min(static_cast<int>(py), ph - 2 < 0 ? 0 : ph - 2);
      const int x1 = std::min(x0 + 1, pw - 1);
      const int y1 = std::min(y0 + 1, ph - 1);
      const double ax = px - x0;
      const double ay = py - y0;
      const double e = (1 - ay) * ((1 - ax) * pan(x0, y0) + ax * pan(x1, y0)) + ay * ((1 - ax) * pan(x0, y1) + ax * pan(x1, y1));
      out[static_cast<std::size_t>(v) * kFrameWidth + u] = std::log(e);
    }
  }
  return out;
}

Image render_view(std::span<const double> log_irradiance, double composite_exposure, const CameraResponse& crf,
                  const RenderOptions& options) {
  if (log_irradiance.size() != static_cast<std::size_t>(kFrameWidth) * kFrameHeight) {
    throw DomainError("view must be 512x384");
  }
  if (!(composite_exposure > 0.0)) throw DomainError("exposure must be positive");
  const double offset = std::log(composite_exposure) + std::log(options.irradiance_scale);
  Image img(kFrameWidth, kFrameHeight, 0, Exposure::from_composite(composite_exposure));
  auto px = img.pixels();
  if (options.noise_sigma > 0.0) {
    std::mt19937_64 rng(options.noise_seed);
    std::normal_distribution<double> noise(0.0, options.noise_sigma);
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double v = crf.inverse(log_irradiance[i] + offset) + noise(rng);
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = crf.inverse(log_irradiance[i] + offset);
  }
  return img;
}

Image render_frame(const IrradianceMap& pan, const PathPoint& pose, double composite_exposure,
                   const CameraResponse& crf, const RenderOptions& options, const Intrinsics& k) {
  const auto view = project_view(pan, pose, k);
  return render_view(view, composite_exposure, crf, options);
}

BracketedFrame capture_bracket(const IrradianceMap& pan, const PathPoint& pose, const CameraResponse& crf,
                               const RenderOptions& options, const Intrinsics& k) {
  const auto view = project_view(pan, pose, k);
  BracketedFrame frame;
  for (std::size_t slot = 0; slot < kBracketLadderUs.size(); ++slot) {
    RenderOptions o = options;
    o.noise_seed = mix_seed(options.noise_seed, slot + 1);
    frame.images[slot] = render_view(view, kBracketLadderUs[slot], crf, o);
  }
  return frame;
}

const Image& select_seed(const BracketedFrame& frame, double target_exposure) {
  if (!(target_exposure > 0.0)) throw DomainError("target exposure must be positive");
  for (int k = static_cast<int>(kBracketLadderUs.size()) - 1; k >= 0; --k) {
    if (kBracketLadderUs[k] <= target_exposure * (1.0 + 1e-12)) return frame.images[k];
  }
  return frame.images[0];
}

Image observe_at(const BracketedSequence& seq, const AugmentationSpec& aug, std::size_t cursor,
                 double target_exposure) {
  const auto idx = augmented_frame_index(seq.size(), aug, cursor);
  const Image& seed = select_seed(seq.frames[idx], target_exposure);
  return apply_flips(synthesize(seed, seed.exposure().composite(), target_exposure, seq.crf), aug);
}

BracketedSequence generate_sequence(std::uint64_t seed, const SceneSpec& spec) {
  if (spec.path.size() < 2) throw DomainError("scene path needs at least 2 frames");
  const auto pan = generate_panorama(seed, spec);
  BracketedSequence seq;
  seq.crf = CameraResponse::gamma(spec.crf_gamma);
  seq.intrinsics = spec.intrinsics;
  seq.fps = spec.fps;
  std::vector<RigidPose> poses;
  seq.frames.reserve(spec.path.size());
  for (std::size_t f = 0; f < spec.path.size(); ++f) {
    RenderOptions o;
    o.noise_sigma = spec.noise_sigma;
    o.noise_seed = mix_seed(seed, 1000003ULL + f);
    o.irradiance_scale = light_scale_at(spec, static_cast<int>(f));
    auto frame = capture_bracket(pan, spec.path[f], seq.crf, o, spec.intrinsics);
    frame.timestamp = static_cast<double>(f) / spec.fps;
    seq.frames.push_back(std::move(frame));
    RigidPose p;
    p.rotation = rot_y(heading_of(spec.path[f], spec.intrinsics));
    poses.push_back(p);
  }
  seq.gt_poses = std::move(poses);
  return seq;
}

SceneSpec switching_scene_spec(int frames) {
  SceneSpec spec;
  spec.path.resize(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    spec.path[f].offset_x = 900.0 + 700.0 * std::sin(2.0 * std::numbers::pi * f / 260.0);
    spec.path[f].offset_y = 48.0;
  }
  spec.light_events = {{130, 0.25}, {260, 4.0}, {390, 0.25}};
  return spec;
}

SceneSpec react_scene_spec(int frames) {
  SceneSpec spec;
  spec.path.assign(static_cast<std::size_t>(frames), PathPoint{900.0, 48.0, std::nullopt});
  spec.light_events = {{100, 1.0 / 16.0}, {200, 16.0}};
  return spec;
}

}  // namespace expo
