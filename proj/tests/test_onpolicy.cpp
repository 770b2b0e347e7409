#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "skelrun/onpolicy/gaussian_policy.hpp"
#include "skelrun/onpolicy/ppo.hpp"
#include "skelrun/onpolicy/returns.hpp"

using namespace skelrun;
using namespace skelrun::onpolicy;

namespace {

GaussianPolicy small_policy(Rng& rng, int sdim = 3, int adim = 2) {
  nn::MlpSpec s{sdim, {5}, adim, nn::Activation::kTanh, nn::Activation::kIdentity, false};
  return GaussianPolicy(s, rng);
}

EpisodeRollout rollout(const GaussianPolicy& pi, int T, Rng& rng) {
  EpisodeRollout ep;
  for (int t = 0; t < T; ++t) {
    auto s = oracle::random_vector(pi.state_dim(), rng);
    auto a = pi.sample(s, rng);
    ep.log_probs.push_back(pi.log_prob(s, a));
    ep.states.push_back(std::move(s));
    ep.actions.push_back(std::move(a));
    ep.rewards.push_back(uniform(rng, -1, 1));
  }
  return ep;
}

}  // namespace

TEST_CASE("compute_returns") {
  const std::vector<double> r{0.3, -1.0, 2.0};
  CHECK(compute_returns(r, 0.0) == r);
  CHECK(compute_returns(std::vector<double>{1, 1}, 0.9) == std::vector<double>{1.9, 1.0});
  CHECK(compute_returns(std::vector<double>{1, 1, 1}, 0.5) ==
        std::vector<double>{1.75, 1.5, 1.0});
  Rng rng(1);
  const auto rewards = oracle::random_vector(50, rng);
  const auto R = compute_returns(rewards, 0.97);
  CHECK(R.back() == rewards.back());
  for (std::size_t t = 0; t + 1 < R.size(); ++t) CHECK(R[t] == rewards[t] + 0.97 * R[t + 1]);
  CHECK_THROWS(compute_returns(rewards, 1.0));
  CHECK_THROWS(compute_returns(rewards, -0.1));
}

TEST_CASE("baseline and advantages") {
  Rng rng(2);
  auto pi = small_policy(rng);
  SUBCASE("single episode baselines itself") {
    RolloutBatch b{{rollout(pi, 6, rng)}};
    const auto adv = advantages(b, 0.9);
    for (double a : adv[0]) CHECK(a == 0.0);
  }
  SUBCASE("identical returns") {
    auto ep = rollout(pi, 4, rng);
    RolloutBatch b{{ep, ep}};
    for (const auto& adv : advantages(b, 0.9))
      for (double a : adv) CHECK(a == 0.0);
  }
  SUBCASE("returns 2 and 4 at t=0") {
    auto e1 = rollout(pi, 1, rng), e2 = rollout(pi, 1, rng);
    e1.rewards = {2.0};
    e2.rewards = {4.0};
    RolloutBatch b{{e1, e2}};
    CHECK(baseline_values(b, 0.9) == std::vector<double>{3.0});
    const auto adv = advantages(b, 0.9);
    CHECK(adv[0][0] == -1.0);
    CHECK(adv[1][0] == 1.0);
  }
  SUBCASE("time alignment drops short episodes from later steps") {
    const std::vector<std::vector<double>> R{{1.0, 2.0, 3.0}, {5.0}};
    CHECK(baseline_values(R) == std::vector<double>{3.0, 2.0, 3.0});
  }
  SUBCASE("batch validation") {
    auto ep = rollout(pi, 3, rng);
    ep.log_probs.pop_back();
    CHECK_THROWS(RolloutBatch{{ep}}.validate());
  }
}

TEST_CASE("log_prob gradient matches finite differences") {
  Rng rng(3);
  auto pi = small_policy(rng);
  const auto s = oracle::random_vector(3, rng);
  const auto a = pi.sample(s, rng);
  double lp = 0.0;
  const auto g = pi.log_prob_grad(s, a, &lp);
  CHECK(lp == doctest::Approx(pi.log_prob(s, a)).epsilon(1e-14));
  auto flat = pi.flat_params();
  std::vector<double> fd(flat.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double o = flat[i];
    flat[i] = o + h;
    pi.set_flat_params(flat);
    const double up = pi.log_prob(s, a);
    flat[i] = o - h;
    pi.set_flat_params(flat);
    const double down = pi.log_prob(s, a);
    flat[i] = o;
    fd[i] = (up - down) / (2 * h);
  }
  pi.set_flat_params(flat);
  CHECK(oracle::max_rel_error(g, fd) < 1e-4);
}

TEST_CASE("reinforce_gradient") {
  Rng rng(4);
  auto pi = small_policy(rng);
  SUBCASE("zero advantages give a zero gradient") {
    RolloutBatch b{{rollout(pi, 5, rng), rollout(pi, 3, rng)}};
    const std::vector<std::vector<double>> zero{std::vector<double>(5, 0.0),
                                                std::vector<double>(3, 0.0)};
    for (double g : reinforce_gradient(pi, b, zero)) CHECK(g == 0.0);
  }
  SUBCASE("one-step episode equals advantage times the score") {
    RolloutBatch b{{rollout(pi, 1, rng)}};
    const double adv = 0.7;
    const auto g = reinforce_gradient(pi, b, {{adv}});
    const auto& ep = b.episodes[0];
    auto flat = pi.flat_params();
    const double h = 1e-6;
    std::vector<double> fd(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double o = flat[i];
      flat[i] = o + h;
      pi.set_flat_params(flat);
      const double up = pi.log_prob(ep.states[0], ep.actions[0]);
      flat[i] = o - h;
      pi.set_flat_params(flat);
      const double down = pi.log_prob(ep.states[0], ep.actions[0]);
      flat[i] = o;
      fd[i] = adv * (up - down) / (2 * h);
    }
    pi.set_flat_params(flat);
    CHECK(oracle::max_rel_error(g, fd) < 1e-4);
  }
  SUBCASE("a constant reward shift cancels against the baseline") {
    RolloutBatch b{{rollout(pi, 6, rng), rollout(pi, 6, rng), rollout(pi, 6, rng)}};
    const auto g0 = reinforce_gradient(pi, b, 0.9);
    for (auto& ep : b.episodes)
      for (double& r : ep.rewards) r += 3.5;
    const auto g1 = reinforce_gradient(pi, b, 0.9);
    for (std::size_t i = 0; i < g0.size(); ++i) CHECK(g1[i] == doctest::Approx(g0[i]).epsilon(1e-9));
  }
  SUBCASE("a constant added to every return at one step is absorbed") {
    RolloutBatch b{{rollout(pi, 4, rng), rollout(pi, 4, rng)}};
    std::vector<std::vector<double>> R;
    for (const auto& ep : b.episodes) R.push_back(compute_returns(ep.rewards, 0.9));
    auto adv_of = [](const std::vector<std::vector<double>>& ret) {
      const auto base = baseline_values(ret);
      auto adv = ret;
      for (auto& a : adv)
        for (std::size_t t = 0; t < a.size(); ++t) a[t] -= base[t];
      return adv;
    };
    const auto g0 = reinforce_gradient(pi, b, adv_of(R));
    for (auto& r : R) r[2] += -4.0;
    const auto g1 = reinforce_gradient(pi, b, adv_of(R));
    for (std::size_t i = 0; i < g0.size(); ++i)
      CHECK(g1[i] == doctest::Approx(g0[i]).epsilon(1e-12));
  }
}

TEST_CASE("clipped objective arithmetic") {
  CHECK(clipped_objective(1.0, 0.37, 0.2) == 0.37);
  CHECK(clipped_objective(1.5, 1.0, 0.2) == 1.2);
  CHECK(clipped_objective(0.5, -1.0, 0.2) == -0.8);
  CHECK(clipped_objective(1.1, 1.0, 0.2) == 1.1);
  CHECK(clipped_objective(0.5, 1.0, 0.2) == 0.5);
}

TEST_CASE("ppo_clip_loss") {
  Rng rng(5);
  auto pi = small_policy(rng);
  RolloutBatch b{{rollout(pi, 8, rng), rollout(pi, 8, rng)}};
  const auto adv = advantages(b, 0.99);
  const auto samples = ppo_samples(b, adv);
  SUBCASE("at the behaviour policy the objective is the mean advantage") {
    double m = 0.0;
    for (const auto& s : samples) m += s.advantage;
    m /= samples.size();
    CHECK(ppo_clip_loss(pi, samples, 0.2) == doctest::Approx(-m).epsilon(1e-12));
  }
  SUBCASE("depends on densities only through their ratio") {
    // Scaling old and new densities by k shifts both log-probs by log k.
    for (const auto& s : samples) {
      const double lp = pi.log_prob(s.state, s.action);
      const double k = std::log(7.3);
      const double r0 = std::exp(lp - s.old_log_prob);
      const double r1 = std::exp((lp + k) - (s.old_log_prob + k));
      CHECK(clipped_objective(r1, s.advantage, 0.2) ==
            doctest::Approx(clipped_objective(r0, s.advantage, 0.2)).epsilon(1e-12));
    }
  }
  SUBCASE("gradient matches finite differences away from the clip kinks") {
    auto moved = pi;
    auto flat = moved.flat_params();
    for (double& v : flat) v += uniform(rng, -0.05, 0.05);
    moved.set_flat_params(flat);
    const auto lg = ppo_clip_loss_grad(moved, samples, 0.2);
    CHECK(lg.loss == doctest::Approx(ppo_clip_loss(moved, samples, 0.2)).epsilon(1e-12));
    const double h = 1e-7;
    std::vector<double> fd(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double o = flat[i];
      flat[i] = o + h;
      moved.set_flat_params(flat);
      const double up = ppo_clip_loss(moved, samples, 0.2);
      flat[i] = o - h;
      moved.set_flat_params(flat);
      const double down = ppo_clip_loss(moved, samples, 0.2);
      flat[i] = o;
      fd[i] = (up - down) / (2 * h);
    }
    CHECK(oracle::max_rel_error(lg.grad, fd, 1e-5) < 1e-4);
  }
}

TEST_CASE("ppo_update") {
  Rng rng(6);
  SUBCASE("zero advantages leave the policy unchanged") {
    auto pi = small_policy(rng);
    RolloutBatch b{{rollout(pi, 10, rng)}};
    std::vector<std::vector<double>> zero{std::vector<double>(10, 0.0)};
    const auto samples = ppo_samples(b, zero);
    const auto before = pi.flat_params();
    nn::AdamState opt(pi.num_params());
    PpoConfig cfg;
    cfg.minibatch = 4;
    ppo_update(pi, samples, cfg, opt, rng);
    CHECK(pi.flat_params() == before);
  }
  SUBCASE("bandit: larger actions are better, the mean action climbs") {
    nn::MlpSpec s{1, {}, 1, nn::Activation::kTanh, nn::Activation::kIdentity, false};
    GaussianPolicy pi(s, rng);
    const std::vector<double> state{1.0};
    nn::AdamState opt(pi.num_params());
    PpoConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 4;
    cfg.minibatch = 32;
    double prev = pi.mean(state)[0];
    for (int u = 0; u < 10; ++u) {
      std::vector<PpoSample> samples;
      double mean_a = 0.0;
      for (int i = 0; i < 256; ++i) {
        PpoSample p;
        p.state = state;
        p.action = pi.sample(state, rng);
        p.old_log_prob = pi.log_prob(state, p.action);
        mean_a += p.action[0];
        samples.push_back(p);
      }
      mean_a /= samples.size();
      for (auto& p : samples) p.advantage = p.action[0] - mean_a;
      const auto st = ppo_update(pi, samples, cfg, opt, rng);
      CHECK(std::isfinite(st.max_clip_overshoot));
      const double now = pi.mean(state)[0];
      CHECK(now > prev);
      prev = now;
    }
  }
}

TEST_CASE("gaussian policy") {
  Rng rng(7);
  auto pi = small_policy(rng);
  CHECK(pi.num_params() == pi.mean_params().size() + 2);
  for (double ls : pi.log_std()) CHECK(ls == doctest::Approx(std::log(0.3)).epsilon(1e-15));
  const auto s = oracle::random_vector(3, rng);
  // Log density of a diagonal normal at its mean.
  const auto m = pi.mean(s);
  CHECK(pi.log_prob(s, m) ==
        doctest::Approx(-2 * (std::log(0.3) + 0.5 * std::log(2 * M_PI))).epsilon(1e-12));
  CHECK_THROWS(pi.set_flat_params(std::vector<double>(3, 0.0)));
}
