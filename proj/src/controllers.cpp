#include "expo/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "expo/checkpoint.hpp"
#include "expo/errors.hpp"
#include "expo/replay.hpp"

namespace expo {

double builtin_step(const Image& img, double exposure, const BuiltinParams& p) {
  const double mu = img.mean();
  const double dev = std::clamp(p.kp * std::log2(p.target / std::max(mu, 1.0)), -kMaxEvStep, kMaxEvStep);
  // apply_ev_delta darkens for positive increments.
  return apply_ev_delta(exposure, -dev);
}

double gradient_metric(const Image& img, double gamma, const GradientParams& p) {
  std::array<double, 256> lut;
  for (int i = 0; i < 256; ++i) lut[i] = std::pow(i / 255.0, gamma);
  const int w = img.width(), h = img.height();
  if (w < 3 || h < 3) return 0.0;
  const double norm = std::log(p.lambda * (1.0 - p.delta) + 1.0);
  const double inv_max = 1.0 / std::sqrt(0.5);
  double sum = 0.0;
  const auto px = img.pixels();
  for (int y = 1; y + 1 < h; ++y) {
    const std::uint8_t* row = px.data() + static_cast<std::size_t>(y) * w;
    const std::uint8_t* up = row - w;
    const std::uint8_t* down = row + w;
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = 0.5 * (lut[row[x + 1]] - lut[row[x - 1]]);
      const double gy = 0.5 * (lut[down[x]] - lut[up[x]]);
      const double g = std::sqrt(gx * gx + gy * gy) * inv_max;
      if (g >= p.delta) sum += std::log(p.lambda * (g - p.delta) + 1.0) / norm;
    }
  }
  return sum / (static_cast<double>(w - 2) * (h - 2));
}

double best_gamma(const Image& img, const GradientParams& p) {
  std::vector<double> order(p.gammas.begin(), p.gammas.end());
  std::stable_sort(order.begin(), order.end(),
                   [](double a, double b) { return std::abs(std::log(a)) < std::abs(std::log(b)); });
  double best = order.front();
  double best_m = gradient_metric(img, best, p);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double m = gradient_metric(img, order[i], p);
    if (m > best_m) {
      best_m = m;
      best = order[i];
    }
  }
  return best;
}

double gradient_step(const Image& img, double exposure, const GradientParams& p) {
  const double g = best_gamma(img, p);
  const double factor = std::clamp(1.0 + p.alpha * (1.0 / g - 1.0), 0.25, 4.0);
  return std::clamp(exposure * factor, kMinComposite, kMaxComposite);
}

std::vector<double> oneshot_candidates(const OneshotParams& p) {
  std::vector<double> out(p.candidates);
  const double l0 = std::log(p.min_us), l1 = std::log(p.max_us);
  for (int i = 0; i < p.candidates; ++i) {
    out[i] = p.candidates == 1 ? p.min_us : std::exp(l0 + (l1 - l0) * i / (p.candidates - 1));
  }
  return out;
}

double oneshot_score(const Image& img, OneshotMetric metric) {
  if (metric == OneshotMetric::kMean) return -std::abs(img.mean() - kTargetMean);
  return gradient_metric(img, 1.0);
}

double oneshot_fit(const BracketedFrame& frame, const CameraResponse& crf, OneshotMetric metric,
                   const OneshotParams& p) {
  double best = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double c : oneshot_candidates(p)) {
    const Image& seed = select_seed(frame, c);
    const double s = oneshot_score(synthesize(seed, seed.exposure().composite(), c, crf), metric);
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

double drl_action(const std::array<Image, kObsFrames>& history, const Actor<float>& actor) {
  std::array<std::vector<std::uint8_t>, kObsFrames> planes;
  for (int i = 0; i < kObsFrames; ++i) planes[i] = resize_area(history[i], kObsSize, kObsSize);
  const auto x = observation_row<float>(stack_observation(planes));
  typename Actor<float>::Cache c;
  const auto& head = actor.forward(x, c);
  return kActionScale * std::tanh(static_cast<double>(head(0, 0)));
}

double drl_infer(const std::array<Image, kObsFrames>& history, double exposure, const Actor<float>& actor) {
  return apply_ev_delta(exposure, drl_action(history, actor));
}

Allocation allocate(double exposure, const AllocLimits& limits) {
  if (!(exposure > 0.0)) throw DomainError("allocate needs a positive exposure");
  Allocation a;
  a.time_us = std::min(exposure, limits.t_max_us);
  if (exposure > limits.t_max_us) {
    a.gain_db = 20.0 * std::log10(exposure / a.time_us);
    if (a.gain_db > limits.g_max_db) {
      a.gain_db = limits.g_max_db;
      a.saturated = true;
    }
  }
  return a;
}

ControllerKind parse_controller_kind(const std::string& name) {
  if (name == "builtin") return ControllerKind::kBuiltin;
  if (name == "gradient") return ControllerKind::kGradient;
  if (name == "oneshot") return ControllerKind::kOneshot;
  if (name == "drl") return ControllerKind::kDrl;
  throw ConfigError("unknown controller kind '" + name + "' (expected builtin|gradient|oneshot|drl)");
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kBuiltin: return "builtin";
    case ControllerKind::kGradient: return "gradient";
    case ControllerKind::kOneshot: return "oneshot";
    case ControllerKind::kDrl: return "drl";
  }
  return "?";
}

namespace {

class BuiltinController : public Controller {
 public:
  BuiltinController(std::string name, BuiltinParams p) : name_(std::move(name)), p_(p) {}
  std::string name() const override { return name_; }
  double next_exposure(const Image& img, const BracketedFrame&, const CameraResponse&, double e) override {
    return builtin_step(img, e, p_);
  }

 private:
  std::string name_;
  BuiltinParams p_;
};

class GradientController : public Controller {
 public:
  GradientController(std::string name, GradientParams p) : name_(std::move(name)), p_(p) {}
  std::string name() const override { return name_; }
  double next_exposure(const Image& img, const BracketedFrame&, const CameraResponse&, double e) override {
    return gradient_step(img, e, p_);
  }

 private:
  std::string name_;
  GradientParams p_;
};

class OneshotController : public Controller {
 public:
  OneshotController(std::string name, OneshotMetric m) : name_(std::move(name)), metric_(m) {}
  std::string name() const override { return name_; }
  double next_exposure(const Image&, const BracketedFrame& bracket, const CameraResponse& crf, double) override {
    return oneshot_fit(bracket, crf, metric_);
  }

 private:
  std::string name_;
  OneshotMetric metric_;
};

class DrlController : public Controller {
 public:
  DrlController(std::string name, std::shared_ptr<const Actor<float>> actor)
      : name_(std::move(name)), actor_(std::move(actor)) {}
  std::string name() const override { return name_; }
  void reset() override { filled_ = 0; }
  double next_exposure(const Image& img, const BracketedFrame&, const CameraResponse&, double e) override {
    // The first frame stands in for the missing history.
    if (filled_ == 0) {
      history_.fill(img);
    } else {
      std::rotate(history_.begin(), history_.begin() + 1, history_.end());
      history_.back() = img;
    }
    ++filled_;
    return drl_infer(history_, e, *actor_);
  }

 private:
  std::string name_;
  std::shared_ptr<const Actor<float>> actor_;
  std::array<Image, kObsFrames> history_;
  int filled_ = 0;
};

}  // namespace

std::unique_ptr<Controller> make_drl_controller(std::shared_ptr<const Actor<float>> actor, std::string name) {
  return std::make_unique<DrlController>(std::move(name), std::move(actor));
}

std::unique_ptr<Controller> make_controller(const ControllerConfig& cfg) {
  const std::string name = cfg.name.empty() ? to_string(cfg.kind) : cfg.name;
  switch (cfg.kind) {
    case ControllerKind::kBuiltin: return std::make_unique<BuiltinController>(name, BuiltinParams{cfg.kp});
    case ControllerKind::kGradient: {
      GradientParams p;
      p.alpha = cfg.gradient_alpha;
      return std::make_unique<GradientController>(name, p);
    }
    case ControllerKind::kOneshot: return std::make_unique<OneshotController>(name, cfg.oneshot_metric);
    case ControllerKind::kDrl: {
      auto loaded = load_checkpoint(cfg.checkpoint);
      return make_drl_controller(std::make_shared<const Actor<float>>(loaded.agent->actor), name);
    }
  }
  throw ConfigError("unknown controller kind");
}

}  // namespace expo
