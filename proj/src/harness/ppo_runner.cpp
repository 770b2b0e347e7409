#include "skelrun/harness/ppo_runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "skelrun/core/format.hpp"
#include "skelrun/onpolicy/ppo.hpp"

namespace skelrun::harness {

parallel::RunResult run_ppo(const ExperimentConfig& cfg, std::uint64_t seed,
                            const parallel::EpisodeCallback& on_episode,
                            const std::filesystem::path& checkpoint) {
  cfg.validate();
  const env::EnvFactory factory = make_env_factory(cfg);
  std::unique_ptr<env::Environment> env = factory();
  const env::EnvDescriptor desc = env->descriptor();
  const nn::MlpSpec spec{desc.obs_dim, cfg.agent.actor_hidden, desc.act_dim,
                         cfg.agent.actor_activation, nn::Activation::kSigmoid, cfg.layer_norm};
  Rng rng(derive_seed({seed, 0x9907}));
  onpolicy::GaussianPolicy policy(spec, rng, 0.3);
  nn::AdamState opt(policy.num_params());
  parallel::StepBudget budget(cfg.env_steps);
  const int repeat = cfg.agent.action_repeat;
  parallel::TesterWorker tester(seed, repeat, factory());

  const auto start = std::chrono::steady_clock::now();
  auto wall = [start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const parallel::Clock clock = cfg.deterministic
                                    ? parallel::Clock([&budget] { return budget.consumed() / 1000.0; })
                                    : parallel::Clock(wall);
  parallel::RunResult result;
  auto emit = [&](const parallel::EpisodeStats& st) {
    result.episodes.push_back(st);
    if (on_episode) on_episode(st);
  };
  auto bundle = [&](std::uint64_t version) {
    return parallel::WeightBundle{std::make_shared<const nn::ParamVector>(policy.mean_params()),
                                  version, clock()};
  };

  std::uint64_t updates = 0;
  std::uint64_t episode = 0;
  while (!budget.exhausted()) {
    onpolicy::RolloutBatch batch;
    std::uint64_t collected = 0;
    while (collected < static_cast<std::uint64_t>(cfg.ppo_rollout_steps) && !budget.exhausted()) {
      onpolicy::EpisodeRollout er;
      parallel::EpisodeStats st;
      st.worker_role = "sampler";
      st.weight_version = updates;
      st.noise_mode = explore::NoiseMode::kNone;
      std::vector<double> action_sum(desc.act_dim, 0.0);
      try {
        std::vector<double> obs =
            env->reset(parallel::sampler_episode_seed(seed, 0, episode++));
        bool done = false;
        while (!done && budget.reserve()) {
          std::vector<double> raw = policy.sample(obs, rng);
          std::vector<double> a = raw;
          for (double& x : a) x = std::clamp(x, 0.0, 1.0);
          er.states.push_back(obs);
          er.log_probs.push_back(policy.log_prob(obs, raw));
          er.actions.push_back(std::move(raw));
          double reward = 0.0;
          int k = 0;
          do {
            env::StepResult r = env->step(a);
            ++st.episode_steps;
            st.return_unscaled += r.reward;
            reward += r.reward;
            for (int i = 0; i < desc.act_dim; ++i) action_sum[i] += a[i];
            obs = std::move(r.observation);
            done = r.terminal;
          } while (!done && ++k < repeat && budget.reserve());
          er.rewards.push_back(ddpg::scale_reward(reward, cfg.agent.reward_scale));
        }
      } catch (const env::EnvError&) {
        st.faulted = true;
        ++result.sampler_faults;
      }
      collected += st.episode_steps;
      st.wallclock_s = clock();
      if (st.episode_steps > 0) {
        st.mean_action.resize(desc.act_dim);
        for (int i = 0; i < desc.act_dim; ++i) st.mean_action[i] = action_sum[i] / st.episode_steps;
      }
      emit(st);
      if (!st.faulted && !er.rewards.empty()) batch.episodes.push_back(std::move(er));
    }
    if (batch.episodes.empty()) break;
    const auto adv = onpolicy::advantages(batch, cfg.ppo.gamma);
    const auto samples = onpolicy::ppo_samples(batch, adv);
    onpolicy::ppo_update(policy, samples, cfg.ppo, opt, rng);
    ++updates;
    result.trainer.publications = updates;
    result.trainer.train_steps += samples.size();
    if (updates % static_cast<std::uint64_t>(cfg.test_every) == 0 || budget.exhausted()) {
      emit(tester.evaluate(bundle(updates), tester.next_seed(), clock));
    }
  }
  if (budget.consumed() > 0) {
    const parallel::WeightBundle last = bundle(updates);
    for (int k = 0; k < cfg.final_eval_episodes; ++k) {
      parallel::EpisodeStats st =
          tester.evaluate(last, parallel::final_eval_seed(seed, k), clock, "final");
      result.final_returns.push_back(st.return_unscaled);
      emit(st);
    }
  }
  result.env_steps = budget.consumed();
  result.elapsed_s = wall();

  if (!checkpoint.empty()) {
    std::ofstream out(checkpoint, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + checkpoint.string());
    out << "skelrun-ppo 1\n" << serialize_config(cfg) << "end\n";
    nn::write_params(out, policy.mean_params());
    out << "log_std=";
    for (std::size_t i = 0; i < policy.log_std().size(); ++i) {
      out << (i ? "," : "") << format_double(policy.log_std()[i]);
    }
    out << '\n';
  }
  return result;
}

}  // namespace skelrun::harness
