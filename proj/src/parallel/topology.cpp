#include "skelrun/parallel/topology.hpp"

#include <chrono>
#include <mutex>
#include <thread>

namespace skelrun::parallel {

void TopologyConfig::validate() const {
  if (n_workers < 3) throw std::invalid_argument("n_workers must be at least 3");
  if (!env_factory) throw std::invalid_argument("topology needs an environment factory");
  if (test_every <= 0) throw std::invalid_argument("test_every must be positive");
  if (final_eval_episodes < 0) throw std::invalid_argument("final_eval_episodes must be >= 0");
  if (queue_capacity == 0) throw std::invalid_argument("queue_capacity must be positive");
  if (wallclock_budget_s < 0.0) throw std::invalid_argument("wallclock budget must be >= 0");
}

std::uint64_t final_eval_seed(std::uint64_t run_seed, int index) {
  return derive_seed({run_seed, 0xf17a1, static_cast<std::uint64_t>(index)});
}

namespace {

struct Setup {
  ddpg::AgentConfig agent_cfg;
  env::EnvDescriptor descriptor;
};

Setup prepare(const TopologyConfig& cfg) {
  cfg.validate();
  auto probe = cfg.env_factory();
  Setup s{cfg.agent, probe->descriptor()};
  if (s.agent_cfg.state_dim == 0) s.agent_cfg.state_dim = s.descriptor.obs_dim;
  if (s.agent_cfg.action_dim == 0) s.agent_cfg.action_dim = s.descriptor.act_dim;
  if (s.agent_cfg.state_dim != s.descriptor.obs_dim ||
      s.agent_cfg.action_dim != s.descriptor.act_dim) {
    throw std::invalid_argument("agent dims do not match the environment");
  }
  s.agent_cfg.validate();
  return s;
}

}  // namespace

RunResult run_topology(const TopologyConfig& cfg, const EpisodeCallback& on_episode) {
  const Setup setup = prepare(cfg);
  SamplerSettings sampler_settings = cfg.sampler;
  sampler_settings.action_repeat = setup.agent_cfg.action_repeat;
  sampler_settings.reward_scale = setup.agent_cfg.reward_scale;

  ddpg::Agent agent(setup.agent_cfg, cfg.seed);
  WeightSlot slot(WeightBundle{std::make_shared<const nn::ParamVector>(agent.actor()),
                               agent.actor().version(), 0.0});
  TrainerWorker trainer(std::move(agent), cfg.seed, setup.descriptor.reflection, cfg.flip, slot);
  std::vector<std::unique_ptr<SamplerWorker>> samplers;
  for (int i = 0; i < cfg.samplers(); ++i) {
    samplers.push_back(std::make_unique<SamplerWorker>(i, cfg.seed, sampler_settings,
                                                       cfg.env_factory(), slot));
  }
  TesterWorker tester(cfg.seed, setup.agent_cfg.action_repeat, cfg.env_factory());
  StepBudget budget(cfg.env_step_budget);
  BoundedQueue<Message> queue(cfg.queue_capacity);

  RunResult result;
  std::mutex emit_mu;
  auto emit = [&](const EpisodeStats& st) {
    std::lock_guard lock(emit_mu);
    result.episodes.push_back(st);
    if (on_episode) on_episode(st);
  };
  const auto start = std::chrono::steady_clock::now();
  auto wall = [start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  Clock clock = cfg.deterministic ? Clock([&budget] { return budget.consumed() / 1000.0; })
                                  : Clock(wall);
  auto push = [&queue](Message m) { queue.push(std::move(m)); };

  if (cfg.deterministic) {
    std::uint64_t tested = 0;
    std::vector<int> fault_streak(samplers.size(), 0);
    std::vector<bool> active(samplers.size(), true);
    bool running = true;
    while (running) {
      running = false;
      for (std::size_t i = 0; i < samplers.size(); ++i) {
        if (!active[i]) continue;
        EpisodeStats st = samplers[i]->run_episode(push, budget, clock);
        if (st.episode_steps == 0 && !st.faulted) {
          active[i] = false;
          continue;
        }
        running = true;
        emit(st);
        fault_streak[i] = st.faulted ? fault_streak[i] + 1 : 0;
        if (fault_streak[i] >= cfg.max_consecutive_faults) active[i] = false;
        while (auto m = queue.try_pop()) {
          if (trainer.handle(std::move(*m), clock) &&
              trainer.stats().publications % static_cast<std::uint64_t>(cfg.test_every) == 0) {
            const WeightBundle b = slot.fetch();
            emit(tester.evaluate(b, tester.next_seed(), clock));
            tested = b.version;
          }
        }
      }
    }
    const WeightBundle last = slot.fetch();
    if (last.version > tested && trainer.stats().publications > 0) {
      emit(tester.evaluate(last, tester.next_seed(), clock));
    }
  } else {
    std::atomic<int> live_samplers(static_cast<int>(samplers.size()));
    std::atomic<bool> stop(false);
    std::vector<std::thread> threads;
    for (auto& sp : samplers) {
      SamplerWorker* s = sp.get();
      threads.emplace_back([&, s] {
        int streak = 0;
        while (!stop.load()) {
          EpisodeStats st = s->run_episode(push, budget, clock);
          if (st.episode_steps == 0 && !st.faulted) break;
          emit(st);
          streak = st.faulted ? streak + 1 : 0;
          if (streak >= cfg.max_consecutive_faults) break;
          if (cfg.wallclock_budget_s > 0.0 && wall() >= cfg.wallclock_budget_s) stop.store(true);
        }
        if (live_samplers.fetch_sub(1) == 1) queue.close();
      });
    }
    std::thread trainer_thread([&] {
      while (auto m = queue.pop()) trainer.handle(std::move(*m), clock);
      slot.close();
    });
    std::thread tester_thread([&] {
      std::uint64_t seen = slot.version();
      for (;;) {
        const WeightBundle b = slot.wait_newer(seen, std::chrono::milliseconds(100));
        if (b.version > seen) {
          emit(tester.evaluate(b, tester.next_seed(), clock));
          seen = b.version;
        } else if (slot.closed()) {
          break;
        }
      }
    });
    for (auto& t : threads) t.join();
    trainer_thread.join();
    tester_thread.join();
  }

  const WeightBundle final_bundle = slot.fetch();
  const int final_episodes = budget.consumed() > 0 ? cfg.final_eval_episodes : 0;
  for (int k = 0; k < final_episodes; ++k) {
    EpisodeStats st = tester.evaluate(final_bundle, final_eval_seed(cfg.seed, k), clock, "final");
    result.final_returns.push_back(st.return_unscaled);
    emit(st);
  }
  result.trainer = trainer.stats();
  result.agent = trainer.agent();
  result.env_steps = budget.consumed();
  for (const auto& s : samplers) result.sampler_faults += s->faults();
  result.elapsed_s = wall();
  return result;
}

}  // namespace skelrun::parallel
