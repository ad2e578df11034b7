#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "expo/errors.hpp"
#include "expo/nn.hpp"

namespace expo {

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kActionScale = 2.0;

struct SacConfig {
  double lr = 1e-4;
  double alpha_lr = 1e-4;
  int batch = 256;
  int episode_len = 500;
  int buffer = 50000;
  int warmup = 5000;
  double gamma = 0.99;
  double tau = 0.005;
  int update_period_frames = 50;
  int updates_per_period = 50;
  double target_entropy = -1.0;
  double init_alpha = 1.0;

  void validate() const;
};

inline void SacConfig::validate() const {
  auto need = [](bool ok, const char* key) {
    if (!ok) throw ConfigError(std::string("sac.") + key + " out of range");
  };
  need(lr > 0, "lr");
  need(alpha_lr > 0, "alpha_lr");
  need(batch > 0, "batch");
  need(episode_len > 0, "episode_len");
  need(buffer > 0, "buffer");
  need(warmup >= 0, "warmup");
  need(gamma >= 0 && gamma < 1, "gamma");
  need(tau > 0 && tau < 1, "tau");
  need(update_period_frames > 0, "update_period_frames");
  need(updates_per_period >= 0, "updates_per_period");
  need(init_alpha > 0, "init_alpha");
}

// ---- squashed Gaussian ----------------------------------------------------

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double clamp_log_std(double raw) { return std::clamp(raw, kLogStdMin, kLogStdMax); }

// log(1 - tanh(u)^2), stable for large |u|.
inline double log_one_minus_tanh_sq(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

// Density of action = 2 tanh(u), u ~ N(mean, exp(log_std)).
inline double squashed_log_prob(double action, double mean, double log_std) {
  const double y = std::clamp(action / kActionScale, -1.0 + 1e-15, 1.0 - 1e-15);
  const double u = std::atanh(y);
  const double z = (u - mean) / std::exp(log_std);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi) - log_one_minus_tanh_sq(u) -
         std::numbers::ln2;
}

struct PolicySample {
  double u = 0.0;
  double action = 0.0;
  double log_prob = 0.0;
  double eps = 0.0;
};

// Reparameterised draw given standard-normal noise eps.
inline PolicySample squashed_sample(double mean, double log_std, double eps) {
  PolicySample s;
  s.eps = eps;
  s.u = mean + std::exp(log_std) * eps;
  s.action = kActionScale * std::tanh(s.u);
  s.log_prob = -0.5 * eps * eps - log_std - 0.5 * std::log(2.0 * std::numbers::pi) - log_one_minus_tanh_sq(s.u) -
               std::numbers::ln2;
  return s;
}

// ---- networks -------------------------------------------------------------

template <class T>
class Actor {
 public:
  struct Cache {
    typename nn::ConvTrunk<T>::Cache trunk;
    nn::MatR<T> hidden;
    nn::MatR<T> head;  // [B, 2]: mean, raw log_std
  };

  Actor() = default;
  explicit Actor(const nn::NetworkSpec& spec) : spec_(spec) {
    nn::Layout layout;
    trunk_ = nn::ConvTrunk<T>(spec, layout);
    fc_ = nn::Linear<T>(trunk_.out_size(), spec.hidden, layout);
    head_ = nn::Linear<T>(spec.hidden, 2, layout);
    params = nn::Vec<T>::Zero(layout.size());
    grads = nn::Vec<T>::Zero(layout.size());
  }

  void init(std::mt19937_64& rng) {
    trunk_.init(params.data(), rng);
    fc_.init(params.data(), rng);
    head_.init(params.data(), rng, 3e-3);
  }

  const nn::NetworkSpec& spec() const { return spec_; }
  int input_size() const { return trunk_.in_size(); }

  // Returns [B, 2] with the raw (unclamped) log_std in column 1.
  const nn::MatR<T>& forward(const nn::MatR<T>& x, Cache& c) const {
    const auto& feat = trunk_.forward(params.data(), x, c.trunk);
    fc_.forward(params.data(), feat, c.hidden);
    nn::relu_inplace(c.hidden);
    head_.forward(params.data(), c.hidden, c.head);
    return c.head;
  }

  // dhead: [B, 2] gradient w.r.t. (mean, raw log_std). Accumulates into grads.
  void backward(const nn::MatR<T>& dhead, Cache& c) {
    nn::MatR<T> dh;
    head_.backward(params.data(), grads.data(), c.hidden, dhead, &dh);
    nn::relu_backward(c.hidden, dh);
    nn::MatR<T> dfeat;
    fc_.backward(params.data(), grads.data(), c.trunk.act.back(), dh, &dfeat);
    trunk_.backward(params.data(), grads.data(), dfeat, c.trunk);
  }

  nn::Vec<T> params;
  nn::Vec<T> grads;

 private:
  nn::NetworkSpec spec_;
  nn::ConvTrunk<T> trunk_;
  nn::Linear<T> fc_;
  nn::Linear<T> head_;
};

// Q(s, a): conv features with the action appended, then a hidden layer.
template <class T>
class Critic {
 public:
  struct Cache {
    typename nn::ConvTrunk<T>::Cache trunk;
    nn::MatR<T> joint;  // [B, features + 1]
    nn::MatR<T> hidden;
    nn::MatR<T> q;  // [B, 1]
  };

  Critic() = default;
  explicit Critic(const nn::NetworkSpec& spec) : spec_(spec) {
    nn::Layout layout;
    trunk_ = nn::ConvTrunk<T>(spec, layout);
    fc_ = nn::Linear<T>(trunk_.out_size() + 1, spec.hidden, layout);
    head_ = nn::Linear<T>(spec.hidden, 1, layout);
    params = nn::Vec<T>::Zero(layout.size());
    grads = nn::Vec<T>::Zero(layout.size());
  }

  void init(std::mt19937_64& rng) {
    trunk_.init(params.data(), rng);
    fc_.init(params.data(), rng);
    head_.init(params.data(), rng, 3e-3);
  }

  const nn::NetworkSpec& spec() const { return spec_; }

  const nn::MatR<T>& forward(const nn::MatR<T>& x, const nn::Vec<T>& action, Cache& c) const {
    const auto& feat = trunk_.forward(params.data(), x, c.trunk);
    c.joint.resize(feat.rows(), feat.cols() + 1);
    c.joint.leftCols(feat.cols()) = feat;
    c.joint.col(feat.cols()) = action;
    return forward_head(c);
  }

  // Re-evaluates the head with a new action on cached conv features.
  const nn::MatR<T>& forward_head(Cache& c) const {
    fc_.forward(params.data(), c.joint, c.hidden);
    nn::relu_inplace(c.hidden);
    head_.forward(params.data(), c.hidden, c.q);
    return c.q;
  }

  void set_action(Cache& c, const nn::Vec<T>& action) const { c.joint.col(c.joint.cols() - 1) = action; }

  // Full backward for dq: [B, 1]; accumulates into grads.
  void backward(const nn::MatR<T>& dq, Cache& c) {
    nn::MatR<T> dh, djoint;
    head_.backward(params.data(), grads.data(), c.hidden, dq, &dh);
    nn::relu_backward(c.hidden, dh);
    fc_.backward(params.data(), grads.data(), c.joint, dh, &djoint);
    nn::MatR<T> dfeat = djoint.leftCols(djoint.cols() - 1);
    trunk_.backward(params.data(), grads.data(), dfeat, c.trunk);
  }

  // dQ/da through the head only; parameters untouched.
  nn::Vec<T> action_gradient(const nn::MatR<T>& dq, const Cache& c) const {
    nn::MatR<T> dh, djoint;
    head_.backward(params.data(), nullptr, c.hidden, dq, &dh);
    nn::relu_backward(c.hidden, dh);
    fc_.backward(params.data(), nullptr, c.joint, dh, &djoint);
    return djoint.col(djoint.cols() - 1);
  }

  nn::Vec<T> params;
  nn::Vec<T> grads;

 private:
  nn::NetworkSpec spec_;
  nn::ConvTrunk<T> trunk_;
  nn::Linear<T> fc_;
  nn::Linear<T> head_;
};

// ---- agent ----------------------------------------------------------------

template <class T>
struct Batch {
  nn::MatR<T> obs;       // [B, C*H*W], values in [0, 1]
  nn::MatR<T> next_obs;  // same shape
  nn::Vec<T> action;
  nn::Vec<T> reward;
  nn::Vec<T> done;  // 1 for terminal

  int size() const { return static_cast<int>(obs.rows()); }
};

struct SacLosses {
  double critic = 0.0;
  double actor = 0.0;
  double alpha = 0.0;
};

// Standard-normal draws consumed by one update: one per sample for the
// target action a' and one per sample for the reparameterised actor action.
struct UpdateNoise {
  std::vector<double> next;
  std::vector<double> current;
};

template <class T>
class SacAgent {
 public:
  SacAgent(const nn::NetworkSpec& spec, const SacConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), actor(spec), q1(spec), q2(spec), q1_target(spec), q2_target(spec), rng(seed) {
    cfg_.validate();
    actor.init(rng);
    q1.init(rng);
    q2.init(rng);
    q1_target.params = q1.params;
    q2_target.params = q2.params;
    log_alpha = std::log(cfg.init_alpha);
    make_optimizers();
  }

  const SacConfig& config() const { return cfg_; }
  const nn::NetworkSpec& spec() const { return actor.spec(); }
  double alpha() const { return std::exp(log_alpha); }

  void make_optimizers() {
    actor_opt = nn::Adam<T>(actor.params.size(), cfg_.lr);
    q1_opt = nn::Adam<T>(q1.params.size(), cfg_.lr);
    q2_opt = nn::Adam<T>(q2.params.size(), cfg_.lr);
    alpha_opt = nn::Adam<T>(1, cfg_.alpha_lr);
  }

  // Stochastic action for a single observation.
  PolicySample sample(const nn::MatR<T>& obs_row) {
    typename Actor<T>::Cache c;
    const auto& head = actor.forward(obs_row, c);
    std::normal_distribution<double> normal;
    return squashed_sample(static_cast<double>(head(0, 0)), clamp_log_std(static_cast<double>(head(0, 1))),
                           normal(rng));
  }

  double deterministic_action(const nn::MatR<T>& obs_row) const {
    typename Actor<T>::Cache c;
    const auto& head = actor.forward(obs_row, c);
    return kActionScale * std::tanh(static_cast<double>(head(0, 0)));
  }

  UpdateNoise draw_noise(int n) {
    std::normal_distribution<double> normal;
    UpdateNoise z;
    z.next.resize(n);
    z.current.resize(n);
    for (auto& v : z.next) v = normal(rng);
    for (auto& v : z.current) v = normal(rng);
    return z;
  }

  // Critic targets y = r + gamma (1 - d) (min Q'(s', a') - alpha log pi(a'|s')).
  nn::Vec<T> targets(const Batch<T>& b, const std::vector<double>& eps_next) const {
    const int n = b.size();
    typename Actor<T>::Cache ac;
    const auto& head = actor.forward(b.next_obs, ac);
    nn::Vec<T> a_next(n);
    std::vector<double> logp(n);
    for (int i = 0; i < n; ++i) {
      const auto s = squashed_sample(head(i, 0), clamp_log_std(head(i, 1)), eps_next[i]);
      a_next(i) = static_cast<T>(s.action);
      logp[i] = s.log_prob;
    }
    typename Critic<T>::Cache c1, c2;
    const auto& t1 = q1_target.forward(b.next_obs, a_next, c1);
    const auto& t2 = q2_target.forward(b.next_obs, a_next, c2);
    const double a = alpha();
    nn::Vec<T> y(n);
    for (int i = 0; i < n; ++i) {
      const double soft = std::min<double>(t1(i, 0), t2(i, 0)) - a * logp[i];
      y(i) = static_cast<T>(b.reward(i) + cfg_.gamma * (1.0 - b.done(i)) * soft);
    }
    return y;
  }

  // Fills actor/critic gradients and the log_alpha gradient from the current
  // parameters. All three losses are evaluated at the same (pre-step) point.
  SacLosses compute_gradients(const Batch<T>& b, const UpdateNoise& noise) {
    const int n = b.size();
    const nn::Vec<T> y = targets(b, noise.next);

    actor.grads.setZero();
    q1.grads.setZero();
    q2.grads.setZero();
    SacLosses out;

    typename Critic<T>::Cache c1, c2;
    const nn::MatR<T> qa = q1.forward(b.obs, b.action, c1);
    const nn::MatR<T> qb = q2.forward(b.obs, b.action, c2);
    nn::MatR<T> d1(n, 1), d2(n, 1);
    double l1 = 0.0, l2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e1 = qa(i, 0) - y(i);
      const double e2 = qb(i, 0) - y(i);
      l1 += e1 * e1;
      l2 += e2 * e2;
      d1(i, 0) = static_cast<T>(2.0 * e1 / n);
      d2(i, 0) = static_cast<T>(2.0 * e2 / n);
    }
    out.critic = (l1 + l2) / n;

    // Actor: reuse the critic conv features of s; only the heads see a~.
    typename Actor<T>::Cache ac;
    const nn::MatR<T> head = actor.forward(b.obs, ac);
    std::vector<PolicySample> s(n);
    nn::Vec<T> a_new(n);
    for (int i = 0; i < n; ++i) {
      s[i] = squashed_sample(head(i, 0), clamp_log_std(head(i, 1)), noise.current[i]);
      a_new(i) = static_cast<T>(s[i].action);
    }
    typename Critic<T>::Cache h1 = head_cache(c1), h2 = head_cache(c2);
    q1.set_action(h1, a_new);
    q2.set_action(h2, a_new);
    const nn::MatR<T> qn1 = q1.forward_head(h1);
    const nn::MatR<T> qn2 = q2.forward_head(h2);
    nn::MatR<T> pick1 = nn::MatR<T>::Zero(n, 1), pick2 = nn::MatR<T>::Zero(n, 1);
    const double a = alpha();
    double actor_loss = 0.0, logp_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool first = qn1(i, 0) <= qn2(i, 0);
      (first ? pick1 : pick2)(i, 0) = T(1);
      actor_loss += a * s[i].log_prob - std::min<double>(qn1(i, 0), qn2(i, 0));
      logp_sum += s[i].log_prob;
    }
    out.actor = actor_loss / n;
    const nn::Vec<T> g1 = q1.action_gradient(pick1, h1);
    const nn::Vec<T> g2 = q2.action_gradient(pick2, h2);
    nn::MatR<T> dhead(n, 2);
    for (int i = 0; i < n; ++i) {
      const double th = std::tanh(s[i].u);
      const double sigma = std::exp(clamp_log_std(head(i, 1)));
      const double dq_da = static_cast<double>(g1(i) + g2(i));
      const double da_du = kActionScale * (1.0 - th * th);
      const double dlogp_dm = 2.0 * th;
      const double dlogp_dls = -1.0 + 2.0 * th * sigma * s[i].eps;
      dhead(i, 0) = static_cast<T>((a * dlogp_dm - dq_da * da_du) / n);
      const bool clamped = head(i, 1) < kLogStdMin || head(i, 1) > kLogStdMax;
      dhead(i, 1) = clamped ? T(0) : static_cast<T>((a * dlogp_dls - dq_da * da_du * sigma * s[i].eps) / n);
    }

    q1.backward(d1, c1);
    q2.backward(d2, c2);
    actor.backward(dhead, ac);

    const double mean_term = logp_sum / n + cfg_.target_entropy;
    out.alpha = -log_alpha * mean_term;
    log_alpha_grad = -mean_term;
    return out;
  }

  SacLosses update(const Batch<T>& b) {
    const SacLosses l = compute_gradients(b, draw_noise(b.size()));
    q1_opt.step(q1.params, q1.grads);
    q2_opt.step(q2.params, q2.grads);
    actor_opt.step(actor.params, actor.grads);
    nn::Vec<T> la(1), lg(1);
    la(0) = static_cast<T>(log_alpha);
    lg(0) = static_cast<T>(log_alpha_grad);
    alpha_opt.step(la, lg);
    log_alpha = static_cast<double>(la(0));
    polyak(cfg_.tau);
    ++updates;
    return l;
  }

  void polyak(double tau) {
    polyak_blend(q1_target.params, q1.params, tau);
    polyak_blend(q2_target.params, q2.params, tau);
  }

  static void polyak_blend(nn::Vec<T>& target, const nn::Vec<T>& online, double tau) {
    target = static_cast<T>(tau) * online + static_cast<T>(1.0 - tau) * target;
  }

 private:
  static typename Critic<T>::Cache head_cache(const typename Critic<T>::Cache& c) {
    typename Critic<T>::Cache h;
    h.joint = c.joint;
    return h;
  }

  SacConfig cfg_;

 public:
  Actor<T> actor;
  Critic<T> q1, q2, q1_target, q2_target;
  double log_alpha = 0.0;
  double log_alpha_grad = 0.0;
  nn::Adam<T> actor_opt, q1_opt, q2_opt, alpha_opt;
  std::mt19937_64 rng;
  std::int64_t updates = 0;
};

}  // namespace expo
