#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "expo/replay.hpp"
#include "expo/sac.hpp"

using namespace expo;
using nn::MatR;
using nn::Vec;

namespace {

MatR<double> random_mat(std::mt19937_64& rng, int r, int c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatR<double> m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// Central difference of f around params[i].
template <class F>
double numeric(Vec<double>& params, Eigen::Index i, F&& f, double h = 1e-6) {
  const double keep = params(i);
  params(i) = keep + h;
  const double up = f();
  params(i) = keep - h;
  const double down = f();
  params(i) = keep;
  return (up - down) / (2 * h);
}

void expect_close(double analytic, double fd, const char* what) {
  EXPECT_NEAR(analytic, fd, 1e-6 + 1e-4 * std::abs(fd)) << what;
}

Batch<double> random_batch(std::mt19937_64& rng, const nn::NetworkSpec& spec, int n) {
  const int in = spec.in_channels * spec.in_size * spec.in_size;
  Batch<double> b;
  b.obs = random_mat(rng, n, in, 0, 1);
  b.next_obs = random_mat(rng, n, in, 0, 1);
  std::uniform_real_distribution<double> ua(-1.9, 1.9), ur(-1, 1);
  b.action.resize(n);
  b.reward.resize(n);
  b.done.resize(n);
  for (int i = 0; i < n; ++i) {
    b.action(i) = ua(rng);
    b.reward(i) = ur(rng);
    b.done(i) = i % 3 == 0 ? 1.0 : 0.0;
  }
  return b;
}

SacConfig small_config() {
  SacConfig c;
  c.batch = 4;
  c.buffer = 100;
  c.warmup = 4;
  return c;
}

std::vector<Eigen::Index> probe_indices(std::mt19937_64& rng, Eigen::Index n, int k) {
  std::uniform_int_distribution<Eigen::Index> u(0, n - 1);
  std::vector<Eigen::Index> out;
  for (int i = 0; i < k; ++i) out.push_back(u(rng));
  out.push_back(n - 1);  // last head bias
  return out;
}

}  // namespace

TEST(Layers, LinearGradients) {
  std::mt19937_64 rng(1);
  nn::Layout layout;
  nn::Linear<double> lin(5, 3, layout);
  Vec<double> params(layout.size());
  lin.init(params.data(), rng);
  const MatR<double> x0 = random_mat(rng, 4, 5), r = random_mat(rng, 4, 3);
  MatR<double> x = x0;
  auto loss = [&] {
    MatR<double> y;
    lin.forward(params.data(), x, y);
    return y.cwiseProduct(r).sum();
  };
  Vec<double> grads = Vec<double>::Zero(params.size());
  MatR<double> dx;
  lin.backward(params.data(), grads.data(), x, r, &dx);
  for (Eigen::Index i = 0; i < params.size(); ++i) expect_close(grads(i), numeric(params, i, loss), "linear param");
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + 1e-6;
      const double up = loss();
      x(i, j) = keep - 1e-6;
      const double down = loss();
      x(i, j) = keep;
      expect_close(dx(i, j), (up - down) / 2e-6, "linear input");
    }
}

TEST(Layers, ConvGradientsAndShape) {
  std::mt19937_64 rng(2);
  nn::Layout layout;
  nn::Conv2d<double> conv(2, 7, 7, nn::ConvSpec{3, 3, 2}, layout);
  EXPECT_EQ(conv.out_h(), 3);
  EXPECT_EQ(conv.out_w(), 3);
  Vec<double> params(layout.size());
  conv.init(params.data(), rng);
  MatR<double> x = random_mat(rng, 2, conv.in_size());
  const MatR<double> r = random_mat(rng, 2, conv.out_size());
  auto loss = [&] {
    MatR<double> y, cols;
    conv.forward(params.data(), x, y, cols);
    return y.cwiseProduct(r).sum();
  };
  MatR<double> y, cols, dx;
  conv.forward(params.data(), x, y, cols);
  Vec<double> grads = Vec<double>::Zero(params.size());
  conv.backward(params.data(), grads.data(), cols, r, &dx);
  for (Eigen::Index i = 0; i < params.size(); ++i) expect_close(grads(i), numeric(params, i, loss), "conv param");
  for (int j = 0; j < x.cols(); j += 5) {
    const double keep = x(1, j);
    x(1, j) = keep + 1e-6;
    const double up = loss();
    x(1, j) = keep - 1e-6;
    const double down = loss();
    x(1, j) = keep;
    expect_close(dx(1, j), (up - down) / 2e-6, "conv input");
  }
}

TEST(Layers, ConvMatchesDirectSum) {
  std::mt19937_64 rng(3);
  nn::Layout layout;
  nn::Conv2d<double> conv(2, 6, 6, nn::ConvSpec{2, 3, 1}, layout);
  Vec<double> params(layout.size());
  conv.init(params.data(), rng);
  const MatR<double> x = random_mat(rng, 1, conv.in_size());
  MatR<double> y, cols;
  conv.forward(params.data(), x, y, cols);
  // Weights are [out][in][ky][kx] then one bias per output channel.
  const int k = 3, oc = 2, ic = 2;
  for (int o = 0; o < oc; ++o)
    for (int oy = 0; oy < 4; ++oy)
      for (int ox = 0; ox < 4; ++ox) {
        double s = params(oc * ic * k * k + o);
        for (int c = 0; c < ic; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              s += params(((o * ic + c) * k + ky) * k + kx) * x(0, c * 36 + (oy + ky) * 6 + ox + kx);
        EXPECT_NEAR(y(0, o * 16 + oy * 4 + ox), s, 1e-12);
      }
}

TEST(Layers, DefaultTrunkShape) {
  nn::Layout layout;
  nn::ConvTrunk<float> trunk(nn::NetworkSpec{}, layout);
  EXPECT_EQ(trunk.in_size(), 4 * 84 * 84);
  EXPECT_EQ(trunk.out_size(), 64 * 7 * 7);
}

TEST(Adam, MatchesReference) {
  nn::Adam<double> opt(2, 0.1);
  Vec<double> p(2), g(2);
  p << 1.0, -2.0;
  double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {1.0, -2.0};
  for (int t = 1; t <= 5; ++t) {
    g << 0.3 * t, -0.7 / t;
    opt.step(p, g);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g(i);
      v[i] = 0.999 * v[i] + 0.001 * g(i) * g(i);
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(p(0), ref[0], 1e-9);
  EXPECT_NEAR(p(1), ref[1], 1e-9);
  EXPECT_EQ(opt.steps(), 5);
}

TEST(Policy, DensityIntegratesToOne) {
  for (auto [m, ls] : {std::pair{0.3, -0.5}, std::pair{-1.0, 0.2}, std::pair{0.0, 1.5}, std::pair{2.0, -1.0}}) {
    // Substitute a = 2 tanh(u) so the integrand stays bounded near the edges.
    const int n = 200000;
    const double lo = -20, hi = 20, du = (hi - lo) / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = lo + (i + 0.5) * du;
      const double a = 2.0 * std::tanh(u);
      if (std::abs(a) >= 2.0) continue;
      const double jac = 2.0 * (1.0 - std::tanh(u) * std::tanh(u));
      total += std::exp(squashed_log_prob(a, m, ls)) * jac * du;
    }
    EXPECT_NEAR(total, 1.0, 1e-3) << m << " " << ls;
  }
}

TEST(Policy, SampleConsistentWithDensity) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    const double m = n(rng), ls = 0.5 * n(rng), eps = n(rng);
    const auto s = squashed_sample(m, ls, eps);
    EXPECT_NEAR(s.u, m + std::exp(ls) * eps, 1e-12);
    EXPECT_NEAR(s.action, 2.0 * std::tanh(s.u), 1e-12);
    if (std::abs(s.u) < 8) {
      EXPECT_NEAR(s.log_prob, squashed_log_prob(s.action, m, ls), 1e-6);
    }
  }
  // Stable for large |u|.
  EXPECT_TRUE(std::isfinite(squashed_sample(30.0, 0.0, 0.0).log_prob));
  EXPECT_NEAR(log_one_minus_tanh_sq(0.7), std::log(1 - std::tanh(0.7) * std::tanh(0.7)), 1e-12);
  EXPECT_DOUBLE_EQ(clamp_log_std(5.0), kLogStdMax);
  EXPECT_DOUBLE_EQ(clamp_log_std(-50.0), kLogStdMin);
}

TEST(Sac, ConfigValidation) {
  SacConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tau = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SacConfig{};
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Sac, CriticGradientsMatchFiniteDifferences) {
  SacAgent<double> agent(nn::NetworkSpec::miniature(), small_config(), 5);
  std::mt19937_64 rng(6);
  const auto b = random_batch(rng, agent.spec(), 4);
  const auto noise = agent.draw_noise(4);
  agent.compute_gradients(b, noise);
  const Vec<double> g1 = agent.q1.grads, g2 = agent.q2.grads;
  auto loss = [&] { return agent.compute_gradients(b, noise).critic; };
  for (auto i : probe_indices(rng, agent.q1.params.size(), 40)) expect_close(g1(i), numeric(agent.q1.params, i, loss), "q1");
  for (auto i : probe_indices(rng, agent.q2.params.size(), 40)) expect_close(g2(i), numeric(agent.q2.params, i, loss), "q2");
}

TEST(Sac, ActorGradientsMatchFiniteDifferences) {
  SacAgent<double> agent(nn::NetworkSpec::miniature(), small_config(), 7);
  // Spread the policy so the tanh and log-std paths both matter.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < agent.actor.params.size(); ++i) agent.actor.params(i) += n(rng) * 0.1;
  agent.log_alpha = std::log(0.3);
  const auto b = random_batch(rng, agent.spec(), 4);
  const auto noise = agent.draw_noise(4);
  agent.compute_gradients(b, noise);
  const Vec<double> g = agent.actor.grads;
  auto loss = [&] { return agent.compute_gradients(b, noise).actor; };
  for (auto i : probe_indices(rng, agent.actor.params.size(), 60)) expect_close(g(i), numeric(agent.actor.params, i, loss), "actor");
}

TEST(Sac, AlphaGradientMatchesFiniteDifference) {
  SacAgent<double> agent(nn::NetworkSpec::miniature(), small_config(), 9);
  std::mt19937_64 rng(10);
  const auto b = random_batch(rng, agent.spec(), 4);
  const auto noise = agent.draw_noise(4);
  agent.compute_gradients(b, noise);
  const double g = agent.log_alpha_grad;
  const double keep = agent.log_alpha;
  agent.log_alpha = keep + 1e-6;
  const double up = agent.compute_gradients(b, noise).alpha;
  agent.log_alpha = keep - 1e-6;
  const double down = agent.compute_gradients(b, noise).alpha;
  expect_close(g, (up - down) / 2e-6, "alpha");
}

TEST(Sac, TargetsFollowBellmanForm) {
  auto cfg = small_config();
  cfg.gamma = 0.0;
  SacAgent<double> agent(nn::NetworkSpec::miniature(), cfg, 11);
  std::mt19937_64 rng(12);
  const auto b = random_batch(rng, agent.spec(), 4);
  const auto noise = agent.draw_noise(4);
  const auto y = agent.targets(b, noise.next);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y(i), b.reward(i));

  // Independent evaluation of y = r + gamma (1 - d) (min Q' - alpha log pi).
  auto cfg2 = small_config();
  cfg2.gamma = 0.9;
  SacAgent<double> a2(nn::NetworkSpec::miniature(), cfg2, 11);
  const auto y2 = a2.targets(b, noise.next);
  Actor<double>::Cache ac;
  const MatR<double> head = a2.actor.forward(b.next_obs, ac);
  for (int i = 0; i < 4; ++i) {
    const double u = head(i, 0) + std::exp(clamp_log_std(head(i, 1))) * noise.next[i];
    const double a = 2.0 * std::tanh(u);
    Vec<double> act(1);
    act(0) = a;
    Critic<double>::Cache c1, c2;
    const MatR<double> row = b.next_obs.row(i);
    const double q = std::min(a2.q1_target.forward(row, act, c1)(0, 0), a2.q2_target.forward(row, act, c2)(0, 0));
    const double want = b.reward(i) + 0.9 * (1 - b.done(i)) * (q - a2.alpha() * squashed_log_prob(a, head(i, 0), clamp_log_std(head(i, 1))));
    EXPECT_NEAR(y2(i), want, 1e-6);
  }
}

TEST(Sac, PolyakAndTargetsStartEqual) {
  SacAgent<double> agent(nn::NetworkSpec::miniature(), small_config(), 13);
  EXPECT_EQ(agent.q1_target.params, agent.q1.params);
  Vec<double> target = Vec<double>::Constant(3, 1.0), online(3);
  online << 2.0, -1.0, 0.5;
  auto t = target;
  SacAgent<double>::polyak_blend(t, online, 1.0);
  EXPECT_EQ(t, online);
  t = target;
  SacAgent<double>::polyak_blend(t, online, 0.0);
  EXPECT_EQ(t, target);
  t = target;
  SacAgent<double>::polyak_blend(t, online, 0.005);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(t(i), 0.995 * target(i) + 0.005 * online(i), 1e-15);
}

TEST(Sac, UpdateMovesEverythingAndIsDeterministic) {
  std::mt19937_64 rng(14);
  const auto b = random_batch(rng, nn::NetworkSpec::miniature(), 4);
  SacAgent<double> a(nn::NetworkSpec::miniature(), small_config(), 15), c(nn::NetworkSpec::miniature(), small_config(), 15);
  const auto before_actor = a.actor.params;
  const auto before_q = a.q1.params;
  const auto before_t = a.q1_target.params;
  const double before_alpha = a.log_alpha;
  for (int i = 0; i < 3; ++i) {
    a.update(b);
    c.update(b);
  }
  EXPECT_NE(a.actor.params, before_actor);
  EXPECT_NE(a.q1.params, before_q);
  EXPECT_NE(a.q1_target.params, before_t);
  EXPECT_NE(a.log_alpha, before_alpha);
  EXPECT_EQ(a.actor.params, c.actor.params);
  EXPECT_EQ(a.q2_target.params, c.q2_target.params);
  EXPECT_EQ(a.log_alpha, c.log_alpha);
  EXPECT_EQ(a.updates, 3);
}

TEST(Sac, CriticLearnsFixedTargets) {
  // With gamma = 0 the critics regress onto rewards; the loss must fall.
  auto cfg = small_config();
  cfg.gamma = 0.0;
  cfg.lr = 1e-3;
  SacAgent<float> agent(nn::NetworkSpec::miniature(), cfg, 16);
  std::mt19937_64 rng(17);
  const auto bd = random_batch(rng, agent.spec(), 16);
  Batch<float> b{bd.obs.cast<float>(), bd.next_obs.cast<float>(), bd.action.cast<float>(), bd.reward.cast<float>(),
                 bd.done.cast<float>()};
  const double first = agent.update(b).critic;
  double last = first;
  for (int i = 0; i < 300; ++i) last = agent.update(b).critic;
  EXPECT_LT(last, 0.2 * first);
}

TEST(Sac, ActionsInRange) {
  SacAgent<float> agent(nn::NetworkSpec::miniature(), small_config(), 18);
  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    const MatR<float> x = random_mat(rng, 1, 256, 0, 1).cast<float>();
    const auto s = agent.sample(x);
    EXPECT_GE(s.action, -2.0);
    EXPECT_LE(s.action, 2.0);
    const double d = agent.deterministic_action(x);
    EXPECT_GE(d, -2.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(Replay, FifoEviction) {
  RingBuffer<int> buf(3);
  for (int i = 0; i < 5; ++i) buf.push(i);
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_TRUE(buf.full());
  EXPECT_EQ(buf[0], 2);
  EXPECT_EQ(buf[1], 3);
  EXPECT_EQ(buf[2], 4);
  EXPECT_THROW(buf[3], std::out_of_range);
  EXPECT_THROW(RingBuffer<int>(0), ConfigError);
}

TEST(Replay, SamplingUniformAndGuarded) {
  RingBuffer<int> buf(10);
  std::mt19937_64 rng(20);
  EXPECT_THROW(buf.sample_indices(rng, 1), ProtocolError);
  for (int i = 0; i < 10; ++i) buf.push(i);
  EXPECT_THROW(buf.sample_indices(rng, 11), ProtocolError);
  std::map<std::size_t, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws / 10; ++k)
    for (auto i : buf.sample_indices(rng, 10)) ++counts[i];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 10; ++i) chi2 += std::pow(counts[i] - draws / 10.0, 2) / (draws / 10.0);
  EXPECT_LT(chi2, 27.88);  // 9 dof, p = 0.001
}

TEST(Replay, CompactRoundTrip) {
  std::vector<std::uint8_t> a(Observation::kSize), b(Observation::kSize);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(i * 7);
  std::copy(a.begin() + Observation::kPlaneSize, a.end(), b.begin());
  for (std::size_t i = Observation::kSize - Observation::kPlaneSize; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(i * 3);
  const Observation o1(a), o2(b);
  const auto t = compact(o1, 0.5, -0.25, o2, false);
  ReplayBuffer buf(4);
  buf.push(t);
  const auto batch = gather_batch<double>(buf, {0});
  for (std::size_t i = 0; i < Observation::kSize; ++i) {
    ASSERT_DOUBLE_EQ(batch.obs(0, i), a[i] / 255.0);
    ASSERT_DOUBLE_EQ(batch.next_obs(0, i), b[i] / 255.0);
  }
  EXPECT_DOUBLE_EQ(batch.action(0), 0.5);
  EXPECT_DOUBLE_EQ(batch.reward(0), -0.25);
  EXPECT_DOUBLE_EQ(batch.done(0), 0.0);
  EXPECT_THROW(compact(o1, 0, 0, o1, false), ProtocolError);
}

TEST(Policy, NarrowStdIsNearlyDeterministic) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  const double first = squashed_sample(0.4, -10.0, n(rng)).action;
  for (int i = 0; i < 100; ++i) EXPECT_LT(std::abs(squashed_sample(0.4, -10.0, n(rng)).action - first), 1e-3);
}

TEST(Policy, DensityOnActionGrid) {
  // Midpoint rule straight in action space, 10^4 points.
  const int n = 10000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = -2.0 + (i + 0.5) * 4.0 / n;
    total += std::exp(squashed_log_prob(a, 0.2, -0.3)) * 4.0 / n;
  }
  EXPECT_NEAR(total, 1.0, 0.01);
}

TEST(Networks, ZeroParamsAndFuzz) {
  Actor<double> actor(nn::NetworkSpec::miniature());
  Critic<double> critic(nn::NetworkSpec::miniature());
  std::mt19937_64 rng(23);
  const MatR<double> x = random_mat(rng, 3, 256, 0, 1);
  Actor<double>::Cache ac;
  EXPECT_EQ(actor.forward(x, ac).cwiseAbs().maxCoeff(), 0.0);
  Critic<double>::Cache cc;
  Vec<double> act = Vec<double>::Constant(3, 0.5);
  EXPECT_EQ(critic.forward(x, act, cc).cwiseAbs().maxCoeff(), 0.0);

  actor.init(rng);
  critic.init(rng);
  const MatR<double> once = actor.forward(x, ac);
  EXPECT_EQ(actor.forward(x, ac), once);
  for (int i = 0; i < 1000; ++i) {
    const MatR<double> xi = random_mat(rng, 1, 256, -5, 5);
    Vec<double> ai(1);
    ai(0) = 4.0 * (i / 1000.0) - 2.0;
    ASSERT_TRUE(actor.forward(xi, ac).allFinite());
    ASSERT_TRUE(critic.forward(xi, ai, cc).allFinite());
  }
}

TEST(Sac, PolyakDriftClosedForm) {
  SacAgent<double> agent(nn::NetworkSpec::miniature(), small_config(), 24);
  const auto theta0 = agent.q1_target.params;
  std::mt19937_64 rng(25);
  for (Eigen::Index i = 0; i < agent.q1.params.size(); ++i) agent.q1.params(i) += 0.1;
  const int k = 37;
  for (int i = 0; i < k; ++i) agent.polyak(0.005);
  const double keep = std::pow(0.995, k);
  const Vec<double> want = keep * theta0 + (1 - keep) * agent.q1.params;
  EXPECT_LT((agent.q1_target.params - want).cwiseAbs().maxCoeff(), 1e-12);

  Vec<double> t = Vec<double>::Zero(1), o = Vec<double>::Ones(1);
  SacAgent<double>::polyak_blend(t, o, 0.005);
  EXPECT_DOUBLE_EQ(t(0), 0.005);
}

TEST(Sac, ZeroTemperatureTargets) {
  auto cfg = small_config();
  cfg.gamma = 0.5;
  SacAgent<double> agent(nn::NetworkSpec::miniature(), cfg, 26);
  agent.log_alpha = -1e3;  // alpha underflows to exactly 0
  ASSERT_EQ(agent.alpha(), 0.0);
  std::mt19937_64 rng(27);
  const auto b = random_batch(rng, agent.spec(), 4);
  std::vector<double> zero(4, 0.0);
  const auto y = agent.targets(b, zero);
  Actor<double>::Cache ac;
  const MatR<double> head = agent.actor.forward(b.next_obs, ac);
  Critic<double>::Cache c1, c2;
  Vec<double> a(4);
  for (int i = 0; i < 4; ++i) a(i) = 2.0 * std::tanh(head(i, 0));
  const MatR<double> q1 = agent.q1_target.forward(b.next_obs, a, c1);
  const MatR<double> q2 = agent.q2_target.forward(b.next_obs, a, c2);
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(y(i), b.reward(i) + 0.5 * (1 - b.done(i)) * std::min(q1(i, 0), q2(i, 0)), 1e-12);
}

TEST(Sac, DiscountFreeTargetWithUnitRewards) {
  auto cfg = small_config();
  cfg.gamma = 0.0;
  SacAgent<double> agent(nn::NetworkSpec::miniature(), cfg, 28);
  std::mt19937_64 rng(29);
  auto b = random_batch(rng, agent.spec(), 4);
  b.reward.setOnes();
  b.done.setZero();
  const auto y = agent.targets(b, agent.draw_noise(4).next);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(y(i), 1.0);
}

TEST(Replay, TableCapacityEviction) {
  RingBuffer<int> buf(50000);
  for (int i = 0; i <= 50000; ++i) buf.push(i);
  EXPECT_EQ(buf.size(), 50000u);
  EXPECT_EQ(buf[0], 1);
  EXPECT_EQ(buf[49999], 50000);
}

TEST(Replay, PerIndexFrequency) {
  RingBuffer<int> buf(100);
  for (int i = 0; i < 100; ++i) buf.push(i);
  std::mt19937_64 rng(30);
  std::vector<int> counts(100, 0);
  for (int k = 0; k < 1000; ++k)
    for (auto i : buf.sample_indices(rng, 100)) ++counts[i];
  for (int c : counts) {
    EXPECT_GT(c, 850);
    EXPECT_LT(c, 1150);
  }
  std::mt19937_64 r1(31), r2(31);
  EXPECT_EQ(buf.sample_indices(r1, 64), buf.sample_indices(r2, 64));
}
