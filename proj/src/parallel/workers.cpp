#include "skelrun/parallel/workers.hpp"

#include <optional>

namespace skelrun::parallel {

WeightSlot::WeightSlot(WeightBundle initial) : latest_(std::move(initial)) {
  if (!latest_.actor) throw std::invalid_argument("WeightSlot: initial bundle has no actor");
}

void WeightSlot::publish(WeightBundle bundle) {
  if (!bundle.actor) throw std::invalid_argument("WeightSlot::publish: bundle has no actor");
  {
    std::lock_guard lock(mu_);
    if (bundle.version <= latest_.version) {
      throw std::logic_error("WeightSlot::publish: version " + std::to_string(bundle.version) +
                             " does not exceed " + std::to_string(latest_.version));
    }
    latest_ = std::move(bundle);
    ++publications_;
  }
  changed_.notify_all();
}

WeightBundle WeightSlot::fetch() const {
  std::lock_guard lock(mu_);
  return latest_;
}

std::uint64_t WeightSlot::version() const {
  std::lock_guard lock(mu_);
  return latest_.version;
}

std::uint64_t WeightSlot::publications() const {
  std::lock_guard lock(mu_);
  return publications_;
}

WeightBundle WeightSlot::wait_newer(std::uint64_t seen, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  changed_.wait_for(lock, timeout, [&] { return closed_ || latest_.version > seen; });
  return latest_;
}

void WeightSlot::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  changed_.notify_all();
}

bool WeightSlot::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool StepBudget::reserve() {
  std::uint64_t cur = consumed_.load();
  while (cur < limit_) {
    if (consumed_.compare_exchange_weak(cur, cur + 1)) return true;
  }
  return false;
}

std::uint64_t sampler_episode_seed(std::uint64_t run_seed, int worker_id, std::uint64_t episode) {
  return derive_seed({run_seed, 0x5a3b1e, static_cast<std::uint64_t>(worker_id), episode});
}

SamplerWorker::SamplerWorker(int worker_id, std::uint64_t run_seed, SamplerSettings settings,
                             std::unique_ptr<env::Environment> env, const WeightSlot& weights)
    : id_(worker_id),
      run_seed_(run_seed),
      s_(settings),
      env_(std::move(env)),
      weights_(weights),
      held_(weights.fetch()),
      rng_(derive_seed({run_seed, 0x5a3b1e + 1, static_cast<std::uint64_t>(worker_id)})),
      ou_(env_->descriptor().act_dim, settings.ou.mu) {
  s_.ou.validate();
  pn_.sigma_p = s_.sigma_p_initial;
  pn_.alpha = s_.alpha;
  pn_.target_d = s_.ou.sigma_start;
}

EpisodeStats SamplerWorker::run_episode(const MessageSink& sink, StepBudget& budget,
                                        const Clock& clock) {
  EpisodeStats st;
  st.worker_role = "sampler";
  st.worker_id = id_;
  st.weight_version = held_.version;
  if (budget.exhausted()) {
    st.wallclock_s = clock();
    return st;
  }
  const std::uint64_t seed = sampler_episode_seed(run_seed_, id_, episode_++);
  const double sigma = explore::sigma_anneal(env_steps_, s_.ou);
  const explore::NoiseMode mode =
      s_.param_noise ? explore::choose_noise_mode(rng_, s_.param_noise_probability)
                     : explore::NoiseMode::kAction;
  const nn::ParamVector& base = *held_.actor;
  std::optional<nn::ParamVector> perturbed;
  if (mode == explore::NoiseMode::kParam) perturbed = explore::perturb_actor(base, pn_.sigma_p, rng_);
  const nn::ParamVector& policy = perturbed ? *perturbed : base;
  st.noise_mode = mode;
  st.sigma = sigma;
  st.sigma_p = pn_.sigma_p;

  explore::ou_reset(ou_, s_.ou);
  ddpg::NoiseHook hook;
  if (mode == explore::NoiseMode::kAction) {
    hook = [&](std::span<double> a) {
      const auto x = explore::ou_step(ou_, s_.ou, sigma, rng_);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
    };
  }
  ddpg::ActionRepeater repeater(s_.action_repeat);
  std::vector<std::vector<double>> probes;
  const int act_dim = env_->descriptor().act_dim;
  std::vector<double> action_sum(act_dim, 0.0);

  try {
    std::vector<double> obs = env_->reset(seed);
    std::vector<double> decision_state;
    std::vector<double> decision_action;
    double decision_reward = 0.0;
    int t = 0;
    bool done = false;
    while (!done && budget.reserve()) {
      const bool decision = repeater.is_decision_step(t);
      std::vector<double> a = repeater.act(policy, obs, t, hook);
      if (decision) {
        decision_state = obs;
        decision_action = a;
        decision_reward = 0.0;
        if (perturbed) probes.push_back(obs);
      }
      env::StepResult r = env_->step(a);
      ++t;
      ++env_steps_;
      st.return_unscaled += r.reward;
      decision_reward += r.reward;
      for (int i = 0; i < act_dim; ++i) action_sum[i] += a[i];
      obs = std::move(r.observation);
      done = r.terminal;
      // A decision cut short by the budget is not sent.
      if (done || repeater.is_decision_step(t)) {
        sink(std::pair<int, Transition>{
            id_, Transition{decision_state, decision_action,
                            ddpg::scale_reward(decision_reward, s_.reward_scale), obs, done}});
      }
    }
    st.episode_steps = t;
  } catch (const env::EnvError&) {
    ++faults_;
    st.faulted = true;
    st.wallclock_s = clock();
    sink(EpisodeEnd{id_, true});
    WeightBundle latest = weights_.fetch();
    if (latest.version > held_.version) held_ = std::move(latest);
    return st;
  }

  if (perturbed && !probes.empty()) {
    const double d = explore::policy_distance(base, *perturbed, probes);
    pn_.target_d = sigma;
    pn_ = explore::adapt_sigma(pn_, d, sigma);
  }
  if (st.episode_steps > 0) {
    st.mean_action.resize(act_dim);
    for (int i = 0; i < act_dim; ++i) st.mean_action[i] = action_sum[i] / st.episode_steps;
  }
  sink(EpisodeEnd{id_, false});
  st.wallclock_s = clock();
  WeightBundle latest = weights_.fetch();
  if (latest.version > held_.version) held_ = std::move(latest);
  return st;
}

TrainerWorker::TrainerWorker(ddpg::Agent agent, std::uint64_t run_seed,
                             symmetry::ReflectionMap reflection, bool flip, WeightSlot& weights)
    : agent_(std::move(agent)),
      replay_(agent_.config().replay_capacity, agent_.config().state_dim,
              agent_.config().action_dim),
      reflection_(std::move(reflection)),
      flip_(flip),
      weights_(weights),
      rng_(derive_seed({run_seed, 0x7a41e5})) {
  if (flip_) reflection_.validate();
}

std::size_t TrainerWorker::staged() const {
  std::size_t n = 0;
  for (const auto& [id, v] : staging_) n += v.size();
  return n;
}

bool TrainerWorker::handle(Message m, const Clock& clock) {
  if (auto* t = std::get_if<std::pair<int, Transition>>(&m)) {
    staging_[t->first].push_back(std::move(t->second));
    ++stats_.transitions_received;
    return false;
  }
  const EpisodeEnd end = std::get<EpisodeEnd>(m);
  std::vector<Transition>& staged = staging_[end.worker_id];
  if (end.faulted) {
    stats_.transitions_dropped += staged.size();
    staged.clear();
    return false;
  }
  const std::size_t steps = staged.size();
  for (const Transition& t : staged) replay_.store(t);
  stats_.transitions_ingested += steps;
  staged.clear();
  ++stats_.episodes;

  const ddpg::AgentConfig& cfg = agent_.config();
  if (steps == 0 || replay_.size() < cfg.warmup_size()) return false;
  const std::size_t draw = flip_ && !cfg.flip_doubles_batch ? cfg.batch_size / 2 : cfg.batch_size;
  const std::uint64_t before = agent_.actor().version();
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<Transition> batch = replay_.sample(draw, rng_);
    if (flip_) batch = symmetry::augment_batch(batch, reflection_);
    try {
      stats_.last_critic_loss = agent_.train_step(batch).critic_loss;
      ++stats_.train_steps;
    } catch (const ddpg::NumericalError&) {
      ++stats_.numerical_errors;
    }
  }
  if (agent_.actor().version() == before) return false;
  weights_.publish(WeightBundle{std::make_shared<const nn::ParamVector>(agent_.actor()),
                                agent_.actor().version(), clock()});
  ++stats_.publications;
  return true;
}

TesterWorker::TesterWorker(std::uint64_t run_seed, int action_repeat,
                           std::unique_ptr<env::Environment> env)
    : run_seed_(run_seed), action_repeat_(action_repeat), env_(std::move(env)) {}

std::uint64_t TesterWorker::next_seed() { return derive_seed({run_seed_, 0x7e57, evaluations_++}); }

EpisodeStats TesterWorker::evaluate(const WeightBundle& bundle, std::uint64_t episode_seed,
                                    const Clock& clock, const std::string& role) {
  EpisodeStats st;
  st.worker_role = role;
  st.weight_version = bundle.version;
  st.noise_mode = explore::NoiseMode::kNone;
  const int act_dim = env_->descriptor().act_dim;
  std::vector<double> action_sum(act_dim, 0.0);
  ddpg::ActionRepeater repeater(action_repeat_);
  try {
    std::vector<double> obs = env_->reset(episode_seed);
    bool done = false;
    int t = 0;
    while (!done) {
      std::vector<double> a = repeater.act(*bundle.actor, obs, t, {});
      env::StepResult r = env_->step(a);
      ++t;
      st.return_unscaled += r.reward;
      for (int i = 0; i < act_dim; ++i) action_sum[i] += a[i];
      obs = std::move(r.observation);
      done = r.terminal;
    }
    st.episode_steps = t;
    st.mean_action.resize(act_dim);
    for (int i = 0; i < act_dim; ++i) st.mean_action[i] = action_sum[i] / t;
  } catch (const env::EnvError&) {
    st.faulted = true;
  }
  st.wallclock_s = clock();
  return st;
}

}  // namespace skelrun::parallel
