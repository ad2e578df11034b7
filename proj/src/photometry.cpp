#include "expo/photometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace expo {

namespace {

// Slack for the floor-style inverse so that G^-1(G(i)) == i survives the
// rounding of ln().
constexpr double kInverseSlack = 1e-9;
constexpr double kMonotoneTolerance = 1e-9;

double debevec_weight(int z) { return static_cast<double>(std::min(z, 255 - z)); }

}  // namespace

double Exposure::composite() const { return compose_exposure(time_us, gain_db); }

void validate(const Exposure& exposure) {
  if (!(exposure.time_us >= kMinTimeUs && exposure.time_us <= kMaxTimeUs)) {
    throw DomainError("exposure time " + std::to_string(exposure.time_us) + " us outside [10, 100000]");
  }
  if (!(exposure.gain_db >= 0.0 && exposure.gain_db <= kMaxGainDb)) {
    throw DomainError("gain " + std::to_string(exposure.gain_db) + " dB outside [0, 24]");
  }
}

double compose_exposure(double time_us, double gain_db) {
  if (!(time_us > 0.0)) throw DomainError("exposure time must be positive");
  if (!(gain_db >= 0.0)) throw DomainError("gain must be non-negative");
  return time_us * std::pow(10.0, gain_db / 20.0);
}

double apply_ev_delta(double composite_us, double dev) {
  if (!(composite_us > 0.0)) throw DomainError("composite exposure must be positive");
  if (!(dev >= -kMaxEvStep && dev <= kMaxEvStep)) {
    throw DomainError("EV action " + std::to_string(dev) + " outside [-2, 2]");
  }
  return std::clamp(composite_us * std::exp2(-dev), kMinComposite, kMaxComposite);
}

double ev_of(double composite_us) {
  if (!(composite_us > 0.0)) throw DomainError("composite exposure must be positive");
  return std::log2(kAperture * kAperture / (composite_us * 1e-6));
}

Image::Image(int width, int height, std::uint8_t fill, Exposure exposure)
    : width_(width), height_(height), exposure_(exposure) {
  if (width < 0 || height < 0) throw DomainError("negative image dimensions");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<std::uint8_t> data, Exposure exposure)
    : width_(width), height_(height), data_(std::move(data)), exposure_(exposure) {
  if (width < 0 || height < 0) throw DomainError("negative image dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw DomainError("image data length does not match width x height");
  }
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  const std::uint64_t sum = std::accumulate(data_.begin(), data_.end(), std::uint64_t{0});
  return static_cast<double>(sum) / static_cast<double>(data_.size());
}

Image flip_horizontal(const Image& img) {
  Image out(img.width(), img.height(), 0, img.exposure());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(img.width() - 1 - x, y) = img(x, y);
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width(), img.height(), 0, img.exposure());
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(&img.pixels()[static_cast<std::size_t>(y) * img.width()], img.width(),
                &out.pixels()[static_cast<std::size_t>(img.height() - 1 - y) * img.width()]);
  }
  return out;
}

IrradianceMap::IrradianceMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw DomainError("irradiance map length does not match width x height");
  }
  if (std::any_of(values_.begin(), values_.end(), [](double v) { return !(v > 0.0); })) {
    throw DomainError("irradiance values must be positive");
  }
}

CameraResponse::CameraResponse() : CameraResponse(linear()) {}

CameraResponse::CameraResponse(const Table& table) : table_(table) {}

CameraResponse CameraResponse::linear() { return gamma(1.0); }

CameraResponse CameraResponse::gamma(double gamma) {
  Table t{};
  for (int i = 0; i < 256; ++i) {
    t[i] = gamma * std::log(std::max(static_cast<double>(i), 0.5) / 128.0);
  }
  return CameraResponse(t);
}

std::uint8_t CameraResponse::inverse(double log_exposure) const {
  const auto it = std::upper_bound(table_.begin(), table_.end(), log_exposure + kInverseSlack);
  const auto idx = static_cast<int>(it - table_.begin()) - 1;
  return static_cast<std::uint8_t>(std::clamp(idx, 0, 255));
}

bool CameraResponse::monotone() const {
  for (int i = 1; i < 256; ++i) {
    if (table_[i] < table_[i - 1] - kMonotoneTolerance) return false;
  }
  return true;
}

void CameraResponse::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CRF file " + path.string());
  out.precision(17);
  for (double v : table_) out << v << '\n';
  if (!out) throw std::runtime_error("failed writing CRF file " + path.string());
}

CameraResponse CameraResponse::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open CRF file " + path.string());
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::istringstream ss(line);
    double v = 0.0;
    if (!(ss >> v)) throw LoadError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    values.push_back(v);
  }
  if (values.size() != 256) {
    throw LoadError(path.string() + ": expected 256 lines, found " + std::to_string(values.size()));
  }
  Table t{};
  std::copy(values.begin(), values.end(), t.begin());
  CameraResponse crf(t);
  if (!crf.monotone()) throw LoadError(path.string() + ": CRF table is not monotone");
  return crf;
}

Image synthesize(const Image& seed, double e0, double e1, const CameraResponse& crf) {
  if (!(e0 > 0.0) || !(e1 > 0.0)) throw DomainError("synthesis exposures must be positive");
  // Shift is applied as a single non-negative/non-positive increment so that
  // brightening never lowers a pixel through rounding.
  const double shift = std::log(e1) - std::log(e0);
  std::array<std::uint8_t, 256> lut{};
  for (int i = 0; i < 256; ++i) lut[i] = crf.inverse(crf(static_cast<std::uint8_t>(i)) + shift);
  Image out(seed.width(), seed.height(), 0, Exposure::from_composite(e1));
  auto src = seed.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = lut[src[i]];
  return out;
}

CameraResponse calibrate_crf(const std::vector<std::vector<Image>>& stacks, const CalibrationOptions& options) {
  struct Site {
    std::size_t stack;
    std::size_t pixel;
  };

  // Candidate sites with their reference intensity, drawn from stacks that
  // actually vary in exposure.
  std::vector<Site> candidates;
  std::vector<int> reference;
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    const auto& stack = stacks[s];
    if (stack.size() < 2) continue;
    std::vector<double> exps;
    for (const auto& img : stack) {
      if (img.size() != stack.front().size()) throw DomainError("images in a stack must share dimensions");
      exps.push_back(img.exposure().composite());
    }
    std::sort(exps.begin(), exps.end());
    if (exps.front() == exps.back()) continue;
    // Reference image: the one closest to the median exposure.
    const double mid = exps[exps.size() / 2];
    std::size_t ref = 0;
    for (std::size_t k = 0; k < stack.size(); ++k) {
      if (std::abs(std::log(stack[k].exposure().composite() / mid)) <
          std::abs(std::log(stack[ref].exposure().composite() / mid))) {
        ref = k;
      }
    }
    for (std::size_t p = 0; p < stack[ref].size(); ++p) {
      candidates.push_back({s, p});
      reference.push_back(stack[ref].pixels()[p]);
    }
  }
  if (candidates.empty()) throw RankDeficiencyError("CRF calibration needs at least two distinct exposures per stack");

  // Stratified sampling over 32 reference-intensity bins.
  std::mt19937_64 rng(options.seed);
  constexpr int kBins = 32;
  std::array<std::vector<std::size_t>, kBins> bins;
  for (std::size_t c = 0; c < candidates.size(); ++c) bins[reference[c] * kBins / 256].push_back(c);
  const int per_bin = std::max(1, options.sample_sites / kBins);
  std::vector<std::size_t> chosen;
  for (auto& bin : bins) {
    std::shuffle(bin.begin(), bin.end(), rng);
    for (int k = 0; k < per_bin && k < static_cast<int>(bin.size()); ++k) chosen.push_back(bin[k]);
  }
  if (static_cast<int>(chosen.size()) < options.sample_sites) {
    std::vector<char> used(candidates.size(), 0);
    for (auto c : chosen) used[c] = 1;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    for (int attempt = 0; attempt < 20 * options.sample_sites && static_cast<int>(chosen.size()) < options.sample_sites;
         ++attempt) {
      const auto c = pick(rng);
      if (!used[c]) {
        used[c] = 1;
        chosen.push_back(c);
      }
    }
  }

  // Keep sites with at least two unsaturated observations.
  std::vector<std::size_t> sites;
  for (auto c : chosen) {
    const auto& stack = stacks[candidates[c].stack];
    int valid = 0;
    for (const auto& img : stack) {
      const int z = img.pixels()[candidates[c].pixel];
      if (z > 0 && z < 255) ++valid;
    }
    if (valid >= 2) sites.push_back(c);
  }
  std::array<bool, 10> deciles{};
  for (auto c : sites) deciles[std::min(9, reference[c] * 10 / 256)] = true;
  const auto decile_count = std::count(deciles.begin(), deciles.end(), true);
  if (sites.size() < 50 || decile_count < 5) {
    throw RankDeficiencyError("CRF calibration needs >= 50 usable sites across >= 5 intensity deciles (got " +
                              std::to_string(sites.size()) + " sites, " + std::to_string(decile_count) +
                              " deciles)");
  }

  // Unknowns: g[0..255] without g[128] (pinned to zero), then ln E per site.
  auto g_col = [](int i) { return i < 128 ? i : i - 1; };
  const int n_g = 255;
  const int n = n_g + static_cast<int>(sites.size());
  std::size_t rows = 254;
  for (auto c : sites) rows += stacks[candidates[c].stack].size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (std::size_t j = 0; j < sites.size(); ++j) {
    const auto& site = candidates[sites[j]];
    for (const auto& img : stacks[site.stack]) {
      const int z = img.pixels()[site.pixel];
      const double w = debevec_weight(z);
      if (w > 0.0) {
        if (z != 128) A(r, g_col(z)) = w;
        A(r, n_g + static_cast<Eigen::Index>(j)) = -w;
        b(r) = w * std::log(img.exposure().composite());
      }
      ++r;
    }
  }
  for (int i = 1; i < 255; ++i, ++r) {
    const double w = options.smoothness * debevec_weight(i);
    if (i - 1 != 128) A(r, g_col(i - 1)) += w;
    if (i != 128) A(r, g_col(i)) += -2.0 * w;
    if (i + 1 != 128) A(r, g_col(i + 1)) += w;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) throw RankDeficiencyError("CRF least-squares system is rank deficient");
  const Eigen::VectorXd x = qr.solve(b);

  CameraResponse::Table table{};
  for (int i = 0; i < 256; ++i) table[i] = (i == 128) ? 0.0 : x(g_col(i));
  CameraResponse crf(table);
  if (!crf.monotone()) throw CalibrationError("CRF calibration failed: recovered response is not monotone");
  return crf;
}

}  // namespace expo
