#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "skelrun/ddpg/agent.hpp"
#include "skelrun/ddpg/checkpoint.hpp"
#include "skelrun/ddpg/replay.hpp"

using namespace skelrun;
using namespace skelrun::ddpg;

namespace {

Transition tagged(double tag, int sdim = 2, int adim = 1) {
  Transition t;
  t.state.assign(sdim, tag);
  t.action.assign(adim, 0.5);
  t.next_state.assign(sdim, tag + 0.5);
  t.reward = tag;
  return t;
}

AgentConfig small_config() {
  AgentConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.actor_hidden = {6, 5};
  c.critic_hidden = {7, 4};
  return c;
}

std::vector<Transition> random_batch(int n, const AgentConfig& c, Rng& rng) {
  std::vector<Transition> b;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.state = oracle::random_vector(c.state_dim, rng);
    t.action = oracle::random_vector(c.action_dim, rng, 0, 1);
    t.next_state = oracle::random_vector(c.state_dim, rng);
    t.reward = uniform(rng, -1, 1);
    t.terminal = rng() % 4 == 0;
    b.push_back(t);
  }
  return b;
}

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> v = a;
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

}  // namespace

TEST_CASE("replay store") {
  ReplayBuffer buf(3, 2, 1);
  buf.store(tagged(1));
  CHECK(buf.size() == 1);
  for (int i = 2; i <= 4; ++i) buf.store(tagged(i));
  CHECK(buf.size() == 3);
  CHECK(buf.at(0) == tagged(2));
  CHECK(buf.at(1) == tagged(3));
  CHECK(buf.at(2) == tagged(4));
  CHECK_THROWS(buf.store(tagged(1, 3, 1)));
}

TEST_CASE("replay keeps exactly the last capacity items in order") {
  for (std::size_t cap : {1u, 4u, 7u}) {
    ReplayBuffer buf(cap, 2, 1);
    const int m = 25;
    for (int i = 0; i < m; ++i) buf.store(tagged(i));
    REQUIRE(buf.size() == cap);
    for (std::size_t k = 0; k < cap; ++k) CHECK(buf.at(k) == tagged(m - cap + k));
  }
}

TEST_CASE("replay sample") {
  Rng rng(1);
  ReplayBuffer buf(100, 2, 1);
  CHECK_THROWS_AS(buf.sample(1, rng), ReplayNotReady);
  CHECK(buf.sample(0, rng).empty());
  buf.store(tagged(7));
  const auto three = buf.sample(3, rng);
  REQUIRE(three.size() == 3);
  for (const auto& t : three) CHECK(t == tagged(7));

  ReplayBuffer small(10, 2, 1);
  for (int i = 0; i < 5; ++i) small.store(tagged(i));
  std::map<double, int> seen;
  for (int i = 0; i < 200; ++i)
    for (const auto& t : small.sample(5, rng)) seen[t.reward]++;
  CHECK(seen.size() == 5);

  Rng a(9), b(9);
  CHECK(small.sample(20, a) == small.sample(20, b));
}

TEST_CASE("replay sampling frequency is uniform") {
  Rng rng(2);
  ReplayBuffer buf(10, 2, 1);
  for (int i = 0; i < 10; ++i) buf.store(tagged(i));
  std::vector<int> count(10, 0);
  for (const auto& t : buf.sample(100'000, rng)) count[static_cast<int>(t.reward)]++;
  for (int c : count) CHECK(std::abs(c / 1e5 - 0.1) < 0.01);
}

TEST_CASE("critic_target") {
  CHECK(critic_target(1.0, false, 2.0, 0.9) == doctest::Approx(2.8).epsilon(1e-15));
  CHECK(critic_target(0.5, true, 123.0, 0.9) == 0.5);
  CHECK(critic_target(0.7, false, 5.0, 0.0) == 0.7);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double r = uniform(rng, -10, 10), q = uniform(rng, -10, 10);
    // Bellman identity up to the rounding of the final subtraction.
    CHECK(critic_target(r, false, q, 0.9) - 0.9 * q == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("scale_reward") {
  CHECK(scale_reward(0.0) == 0.0);
  CHECK(scale_reward(0.37) == doctest::Approx(3.7).epsilon(1e-15));
  CHECK(scale_reward(-0.1) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("target_update") {
  nn::MlpSpec s{2, {3}, 1, nn::Activation::kTanh, nn::Activation::kIdentity, true};
  Rng rng(4);
  const auto p = oracle::random_params(s, rng);
  SUBCASE("tau 1 copies") {
    auto t = oracle::random_params(s, rng);
    target_update(p, t, 1.0);
    CHECK(t.same_values(p));
  }
  SUBCASE("tau one half is the midpoint") {
    nn::ParamVector a(s), t(s);
    for (double& v : a.values()) v = 2.0;
    target_update(a, t, 0.5);
    for (double v : t.values()) CHECK(v == 1.0);
  }
  SUBCASE("geometric contraction and drift bound") {
    auto t = oracle::random_params(s, rng);
    const double tau = 0.1;
    double dist = nn::param_distance(p, t);
    for (int i = 0; i < 50; ++i) {
      const auto before = t;
      target_update(p, t, tau);
      for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(std::abs(t.values()[k] - before.values()[k]) <=
              tau * std::abs(p.values()[k] - before.values()[k]) * (1 + 1e-12) +
                  1e-15 * std::abs(before.values()[k]));
      }
      const double next = nn::param_distance(p, t);
      CHECK(next == doctest::Approx((1 - tau) * dist).epsilon(1e-9));
      dist = next;
    }
  }
}

TEST_CASE("critic gradient matches finite differences of the loss") {
  Rng rng(5);
  const auto cfg = small_config();
  Agent agent(cfg, 11);
  const auto batch = random_batch(8, cfg, rng);
  const auto g = agent.compute_gradients(batch);
  // Targets do not depend on the critic, so the loss is a plain function of it.
  std::vector<double> y;
  for (const auto& t : batch) {
    const auto a2 = nn::predict(agent.target_actor(), t.next_state);
    const double qn = nn::predict(agent.target_critic(), concat(t.next_state, a2))[0];
    y.push_back(t.terminal ? t.reward : t.reward + cfg.gamma * qn);
  }
  auto loss = [&](const nn::ParamVector& c) {
    double l = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double e = nn::predict(c, concat(batch[i].state, batch[i].action))[0] - y[i];
      l += e * e;
    }
    return l / batch.size();
  };
  CHECK(g.critic_loss == doctest::Approx(loss(agent.critic())).epsilon(1e-12));
  nn::ParamVector c = agent.critic();
  std::vector<double> fd(c.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double o = c.values()[i];
    c.values()[i] = o + h;
    const double up = loss(c);
    c.values()[i] = o - h;
    const double down = loss(c);
    c.values()[i] = o;
    fd[i] = (up - down) / (2 * h);
  }
  CHECK(oracle::max_rel_error(g.critic, fd) < 1e-4);
}

TEST_CASE("actor gradient matches finite differences through the critic") {
  Rng rng(6);
  const auto cfg = small_config();
  Agent agent(cfg, 12);
  const auto batch = random_batch(8, cfg, rng);
  const auto g = agent.compute_gradients(batch);
  auto objective = [&](const nn::ParamVector& actor) {
    double s = 0.0;
    for (const auto& t : batch) {
      const auto a = nn::predict(actor, t.state);
      s += nn::predict(agent.critic(), concat(t.state, a))[0];
    }
    return -s / batch.size();
  };
  nn::ParamVector a = agent.actor();
  std::vector<double> fd(a.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double o = a.values()[i];
    a.values()[i] = o + h;
    const double up = objective(a);
    a.values()[i] = o - h;
    const double down = objective(a);
    a.values()[i] = o;
    fd[i] = (up - down) / (2 * h);
  }
  CHECK(oracle::max_rel_error(g.actor, fd) < 1e-4);
}

TEST_CASE("train_step with targets equal to the critic leaves the critic alone") {
  Rng rng(7);
  const auto cfg = small_config();
  Agent agent(cfg, 13);
  auto batch = random_batch(10, cfg, rng);
  // Rewards are the critic's own batched outputs, so every residual is zero.
  std::vector<double> sa;
  for (const auto& t : batch) {
    const auto row = concat(t.state, t.action);
    sa.insert(sa.end(), row.begin(), row.end());
  }
  nn::BatchWorkspace ws;
  nn::forward_batch(agent.critic(), sa, static_cast<int>(batch.size()), ws);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].terminal = true;
    batch[i].reward = ws.output()[i];
  }
  const auto critic_before = agent.critic();
  const auto stats = agent.train_step(batch);
  CHECK(stats.critic_loss == 0.0);
  CHECK(agent.critic().same_values(critic_before));
  CHECK(agent.train_steps() == 1);
}

TEST_CASE("repeated train steps fit a singleton target") {
  const auto cfg = small_config();
  Agent agent(cfg, 14);
  Transition t;
  t.state = {0.2, -0.4, 0.6};
  t.action = {0.3, 0.8};
  t.next_state = {0.1, 0.1, 0.1};
  t.reward = 1.0;
  t.terminal = true;
  const std::vector<Transition> batch{t};
  for (int i = 0; i < 3000; ++i) agent.train_step(batch);
  const double q = nn::predict(agent.critic(), concat(t.state, t.action))[0];
  CHECK(std::abs(q - 1.0) < 1e-3);
}

TEST_CASE("training is deterministic") {
  Rng rng(8);
  const auto cfg = small_config();
  const auto batch = random_batch(20, cfg, rng);
  Agent a(cfg, 15), b(cfg, 15);
  for (int i = 0; i < 20; ++i) {
    a.train_step(batch);
    b.train_step(batch);
    REQUIRE(a.actor().same_values(b.actor()));
    REQUIRE(a.critic().same_values(b.critic()));
    REQUIRE(a.target_actor().same_values(b.target_actor()));
  }
}

TEST_CASE("non-finite batch aborts the step with the agent unchanged") {
  Rng rng(9);
  const auto cfg = small_config();
  Agent agent(cfg, 16);
  auto batch = random_batch(6, cfg, rng);
  batch[2].reward = std::numeric_limits<double>::infinity();
  const auto actor = agent.actor(), critic = agent.critic();
  CHECK_THROWS_AS(agent.train_step(batch), NumericalError);
  CHECK(agent.actor().same_values(actor));
  CHECK(agent.critic().same_values(critic));
  CHECK(agent.train_steps() == 0);
}

TEST_CASE("agent config defaults and validation") {
  AgentConfig c;
  CHECK(c.gamma == 0.9);
  CHECK(c.batch_size == 200);
  CHECK(c.reward_scale == 10.0);
  CHECK(c.action_repeat == 5);
  CHECK(c.replay_capacity == 5'000'000);
  CHECK(c.warmup_size() == 2000);
  c.state_dim = 10;
  c.action_dim = 4;
  c.validate();
  CHECK(c.actor_spec().output_activation == nn::Activation::kSigmoid);
  CHECK(c.critic_spec().input_dim == 14);
  c.batch_size = 201;
  CHECK_THROWS(c.validate());
  c.batch_size = 200;
  c.gamma = 1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("action repeat") {
  Rng rng(10);
  nn::MlpSpec s{3, {8}, 2, nn::Activation::kElu, nn::Activation::kSigmoid, false};
  const auto actor = nn::init_params(s, rng);
  SUBCASE("cadence") {
    ActionRepeater rep(5);
    int noise_calls = 0;
    NoiseHook hook = [&](std::span<double> a) {
      ++noise_calls;
      for (double& x : a) x += 0.01 * noise_calls;
    };
    std::vector<double> first;
    for (int t = 0; t < 5; ++t) {
      const auto a = rep.act(actor, oracle::random_vector(3, rng), t, hook);
      if (t == 0) first = a;
      CHECK(a == first);
    }
    CHECK(rep.act(actor, oracle::random_vector(3, rng), 5, hook) != first);
    CHECK(noise_calls == 2);
  }
  SUBCASE("fresh evaluations equal ceil(L / repeat)") {
    for (int L : {1, 4, 5, 6, 99, 1000}) {
      ActionRepeater rep(5);
      for (int t = 0; t < L; ++t) rep.act(actor, oracle::random_vector(3, rng), t);
      CHECK(rep.fresh_evaluations() == static_cast<std::uint64_t>((L + 4) / 5));
    }
  }
  SUBCASE("no cache on a non-decision step forces a fresh action") {
    ActionRepeater rep(5);
    const auto obs = oracle::random_vector(3, rng);
    CHECK(rep.act(actor, obs, 3) == nn::predict(actor, obs));
    CHECK(rep.fresh_evaluations() == 1);
  }
  SUBCASE("noise-free decision steps are a pure function of the observation") {
    ActionRepeater a(5), b(5);
    const auto obs = oracle::random_vector(3, rng);
    CHECK(a.act(actor, obs, 0) == b.act(actor, obs, 10));
  }
  SUBCASE("box clamp") {
    ActionRepeater rep(5);
    NoiseHook push = [](std::span<double> a) {
      a[0] += 100.0;
      a[1] -= 100.0;
    };
    const auto a = rep.act(actor, oracle::random_vector(3, rng), 0, push);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);
  }
}

TEST_CASE("checkpoint round-trip") {
  Rng rng(11);
  const auto cfg = small_config();
  Agent agent(cfg, 17);
  agent.train_step(random_batch(10, cfg, rng));
  std::stringstream ss;
  write_checkpoint(ss, agent, {{"run.seed", "17"}});
  const auto ck = read_checkpoint(ss);
  CHECK(ck.config == cfg);
  CHECK(ck.extra.at("run.seed") == "17");
  CHECK(ck.actor.same_values(agent.actor()));
  CHECK(ck.critic.same_values(agent.critic()));
  CHECK(ck.target_actor.same_values(agent.target_actor()));
  CHECK(ck.target_critic.same_values(agent.target_critic()));
  CHECK(ck.actor.version() == agent.actor().version());

  Agent restored(ck.config, 99);
  restored.load(ck.actor, ck.critic, ck.target_actor, ck.target_critic);
  CHECK(restored.actor().same_values(agent.actor()));
  CHECK(restored.train_steps() == agent.train_steps());

  std::stringstream junk("skelrun-checkpoint 1\nddpg.gamma=oops\nend\n");
  CHECK_THROWS_AS(read_checkpoint(junk), CheckpointError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_checkpoint(empty), CheckpointError);
}
