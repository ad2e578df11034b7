#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "expo/photometry.hpp"
#include "expo/sac.hpp"
#include "expo/scene.hpp"

namespace expo {

inline constexpr double kTargetMean = 127.5;

// ---- built-in proportional feedback ----

struct BuiltinParams {
  double kp = 0.35;
  double target = kTargetMean;
};

double builtin_step(const Image& img, double exposure, const BuiltinParams& p = {});

// ---- gradient-maximising (gamma survey) ----

struct GradientParams {
  std::array<double, 7> gammas{0.5, 0.667, 0.8, 1.0, 1.25, 1.5, 2.0};
  double lambda = 1000.0;
  double delta = 0.06;
  double alpha = 0.5;
};

// Mean over interior pixels of the log-compressed gradient magnitude of the
// gamma-corrected image.
double gradient_metric(const Image& img, double gamma, const GradientParams& p = {});

// Gamma with the largest metric; exact ties go to the gamma nearest 1.
double best_gamma(const Image& img, const GradientParams& p = {});

double gradient_step(const Image& img, double exposure, const GradientParams& p = {});

// ---- one-shot function fitting ----

enum class OneshotMetric { kMean, kGradient };

struct OneshotParams {
  int candidates = 25;
  double min_us = 50.0;
  double max_us = 80000.0;
};

std::vector<double> oneshot_candidates(const OneshotParams& p = {});

// Metric score of one candidate rendering (larger is better).
double oneshot_score(const Image& img, OneshotMetric metric);

double oneshot_fit(const BracketedFrame& frame, const CameraResponse& crf, OneshotMetric metric,
                   const OneshotParams& p = {});

// ---- learned policy ----

// Deterministic action 2 tanh(mean) for a 4-image history (oldest first).
double drl_action(const std::array<Image, kObsFrames>& history, const Actor<float>& actor);
double drl_infer(const std::array<Image, kObsFrames>& history, double exposure, const Actor<float>& actor);

// ---- time/gain allocation ----

struct AllocLimits {
  double t_max_us = 10000.0;
  double g_max_db = 24.0;
};

struct Allocation {
  double time_us = 0.0;
  double gain_db = 0.0;
  bool saturated = false;
};

Allocation allocate(double exposure, const AllocLimits& limits = {});

// ---- closed-loop wrapper ----

enum class ControllerKind { kBuiltin, kGradient, kOneshot, kDrl };

ControllerKind parse_controller_kind(const std::string& name);
std::string to_string(ControllerKind kind);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kBuiltin;
  std::string name;  // display name; defaults to the kind
  double kp = 0.35;
  double gradient_alpha = 0.5;
  OneshotMetric oneshot_metric = OneshotMetric::kMean;
  std::string checkpoint;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  // Sees the frame rendered at `exposure` (plus its bracket survey) and
  // returns the exposure for the next frame.
  virtual double next_exposure(const Image& img, const BracketedFrame& bracket, const CameraResponse& crf,
                               double exposure) = 0;
};

std::unique_ptr<Controller> make_controller(const ControllerConfig& cfg);

// Wraps an in-memory actor (used right after training).
std::unique_ptr<Controller> make_drl_controller(std::shared_ptr<const Actor<float>> actor, std::string name = "drl");

}  // namespace expo
