#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "expo/errors.hpp"

namespace expo {

// Artifact-wide exposure bounds. Composite exposures are expressed in
// microseconds-equivalent at 0 dB gain.
inline constexpr double kMinTimeUs = 10.0;
inline constexpr double kMaxTimeUs = 100000.0;
inline constexpr double kMaxGainDb = 24.0;
inline constexpr double kMinComposite = kMinTimeUs;
inline constexpr double kMaxComposite = kMaxTimeUs;
inline constexpr double kMaxEvStep = 2.0;
inline constexpr double kAperture = 1.0;

struct Exposure {
  double time_us = 1000.0;
  double gain_db = 0.0;

  double composite() const;

  // Exposure with the given composite value stored entirely as time.
  static Exposure from_composite(double composite_us) { return {composite_us, 0.0}; }
};

// Throws DomainError unless time/gain are inside the artifact bounds.
void validate(const Exposure& exposure);

double compose_exposure(double time_us, double gain_db);

// e * 2^-dev, clamped to [kMinComposite, kMaxComposite]. An EV increment of
// -1 doubles the exposure.
double apply_ev_delta(double composite_us, double dev);

double ev_of(double composite_us);

class Image {
 public:
  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0, Exposure exposure = {});
  Image(int width, int height, std::vector<std::uint8_t> data, Exposure exposure = {});

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::uint8_t operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const { return data_; }
  std::span<std::uint8_t> pixels() { return data_; }

  const Exposure& exposure() const { return exposure_; }
  void set_exposure(Exposure e) { exposure_ = e; }

  double mean() const;

  bool same_pixels(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && data_ == other.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
  Exposure exposure_;
};

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

class IrradianceMap {
 public:
  IrradianceMap() = default;
  IrradianceMap(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  double operator()(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const double> values() const { return values_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Log-domain inverse camera response G: intensity -> ln(e * E), with the
// gauge fixed by G(128) = 0.
class CameraResponse {
 public:
  using Table = std::array<double, 256>;

  CameraResponse();
  explicit CameraResponse(const Table& table);

  // G(i) = ln(i / 128); zero intensity is pinned at ln(0.5 / 128).
  static CameraResponse linear();
  // G(i) = gamma * ln(i / 128), same zero pin.
  static CameraResponse gamma(double gamma);

  double operator()(std::uint8_t intensity) const { return table_[intensity]; }
  const Table& table() const { return table_; }

  // Largest intensity i with G(i) <= x, clamped to [0, 255].
  std::uint8_t inverse(double log_exposure) const;

  bool monotone() const;

  void save(const std::filesystem::path& path) const;
  static CameraResponse load(const std::filesystem::path& path);

 private:
  Table table_{};
};

// Exposure re-synthesis: I1 = clamp(G^-1(G(I0) - ln e0 + ln e1)).
Image synthesize(const Image& seed, double e0, double e1, const CameraResponse& crf);

struct CalibrationOptions {
  double smoothness = 1.0;
  int sample_sites = 256;
  std::uint64_t seed = 0;
};

// Debevec-style least squares. Each inner vector is one static scene observed
// at several exposures; image exposure metadata supplies e.
CameraResponse calibrate_crf(const std::vector<std::vector<Image>>& stacks,
                             const CalibrationOptions& options = {});

}  // namespace expo
