#include "skelrun/ddpg/agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "skelrun/core/format.hpp"

namespace skelrun::ddpg {

nn::MlpSpec AgentConfig::actor_spec() const {
  return nn::MlpSpec{state_dim, actor_hidden, action_dim, actor_activation,
                     nn::Activation::kSigmoid, layer_norm};
}

nn::MlpSpec AgentConfig::critic_spec() const {
  return nn::MlpSpec{state_dim + action_dim, critic_hidden, 1, critic_activation,
                     nn::Activation::kIdentity, layer_norm};
}

void AgentConfig::validate() const {
  if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("ddpg: dims must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ddpg.gamma must lie in [0,1)");
  if (batch_size <= 0 || batch_size % 2 != 0) {
    throw std::invalid_argument("ddpg.batch_size must be positive and even");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("ddpg.tau must lie in (0,1]");
  if (action_repeat <= 0) throw std::invalid_argument("ddpg.action_repeat must be positive");
  if (!std::isfinite(reward_scale)) throw std::invalid_argument("ddpg.reward_scale must be finite");
  if (replay_capacity == 0) throw std::invalid_argument("ddpg.replay_capacity must be positive");
  if (warmup_factor < 0) throw std::invalid_argument("ddpg.warmup_factor must be non-negative");
  for (const auto* s : {&actor_lr, &critic_lr}) {
    if (!(s->start >= s->end && s->end > 0.0) || s->horizon == 0) {
      throw std::invalid_argument("ddpg learning-rate schedule needs start >= end > 0, horizon > 0");
    }
  }
  actor_spec().validate();
  critic_spec().validate();
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_int<int>(part));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> agent_config_entries(const AgentConfig& c) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"ddpg.state_dim", std::to_string(c.state_dim)},
      {"ddpg.action_dim", std::to_string(c.action_dim)},
      {"ddpg.gamma", format_double(c.gamma)},
      {"ddpg.batch_size", std::to_string(c.batch_size)},
      {"ddpg.flip_doubles_batch", b(c.flip_doubles_batch)},
      {"ddpg.reward_scale", format_double(c.reward_scale)},
      {"ddpg.action_repeat", std::to_string(c.action_repeat)},
      {"ddpg.tau", format_double(c.tau)},
      {"ddpg.replay_capacity", std::to_string(c.replay_capacity)},
      {"ddpg.warmup_factor", std::to_string(c.warmup_factor)},
      {"ddpg.actor_hidden", join_ints(c.actor_hidden)},
      {"ddpg.critic_hidden", join_ints(c.critic_hidden)},
      {"ddpg.actor_activation", nn::to_string(c.actor_activation)},
      {"ddpg.critic_activation", nn::to_string(c.critic_activation)},
      {"ddpg.layer_norm", b(c.layer_norm)},
      {"ddpg.actor_lr_start", format_double(c.actor_lr.start)},
      {"ddpg.actor_lr_end", format_double(c.actor_lr.end)},
      {"ddpg.actor_lr_horizon", std::to_string(c.actor_lr.horizon)},
      {"ddpg.critic_lr_start", format_double(c.critic_lr.start)},
      {"ddpg.critic_lr_end", format_double(c.critic_lr.end)},
      {"ddpg.critic_lr_horizon", std::to_string(c.critic_lr.horizon)},
  };
}

bool set_agent_config_entry(AgentConfig& c, const std::string& key, const std::string& v) {
  if (key == "ddpg.state_dim") c.state_dim = parse_int<int>(v);
  else if (key == "ddpg.action_dim") c.action_dim = parse_int<int>(v);
  else if (key == "ddpg.gamma") c.gamma = parse_double(v);
  else if (key == "ddpg.batch_size") c.batch_size = parse_int<int>(v);
  else if (key == "ddpg.flip_doubles_batch") c.flip_doubles_batch = parse_bool(v);
  else if (key == "ddpg.reward_scale") c.reward_scale = parse_double(v);
  else if (key == "ddpg.action_repeat") c.action_repeat = parse_int<int>(v);
  else if (key == "ddpg.tau") c.tau = parse_double(v);
  else if (key == "ddpg.replay_capacity") c.replay_capacity = parse_int<std::size_t>(v);
  else if (key == "ddpg.warmup_factor") c.warmup_factor = parse_int<int>(v);
  else if (key == "ddpg.actor_hidden") c.actor_hidden = split_ints(v);
  else if (key == "ddpg.critic_hidden") c.critic_hidden = split_ints(v);
  else if (key == "ddpg.actor_activation") c.actor_activation = nn::activation_from_string(v);
  else if (key == "ddpg.critic_activation") c.critic_activation = nn::activation_from_string(v);
  else if (key == "ddpg.layer_norm") c.layer_norm = parse_bool(v);
  else if (key == "ddpg.actor_lr_start") c.actor_lr.start = parse_double(v);
  else if (key == "ddpg.actor_lr_end") c.actor_lr.end = parse_double(v);
  else if (key == "ddpg.actor_lr_horizon") c.actor_lr.horizon = parse_int<std::uint64_t>(v);
  else if (key == "ddpg.critic_lr_start") c.critic_lr.start = parse_double(v);
  else if (key == "ddpg.critic_lr_end") c.critic_lr.end = parse_double(v);
  else if (key == "ddpg.critic_lr_horizon") c.critic_lr.horizon = parse_int<std::uint64_t>(v);
  else return false;
  return true;
}

double critic_target(double r, bool terminal, double q_next, double gamma) {
  return terminal ? r : r + gamma * q_next;
}

double scale_reward(double raw, double scale) { return scale * raw; }

void target_update(const nn::ParamVector& params, nn::ParamVector& target, double tau) {
  if (!params.same_layout(target)) throw nn::DimensionError("target_update: layout mismatch");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("target_update: tau outside (0,1]");
  auto p = params.values();
  auto t = target.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * p[i] + (1.0 - tau) * t[i];
  target.set_version(target.version() + 1);
}

Agent::Agent(AgentConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      actor_(cfg_.actor_spec()),
      critic_(cfg_.critic_spec()),
      target_actor_(cfg_.actor_spec()),
      target_critic_(cfg_.critic_spec()),
      actor_opt_(0),
      critic_opt_(0) {
  cfg_.validate();
  Rng rng(derive_seed({seed, 0xac7042}));
  actor_ = nn::init_params(cfg_.actor_spec(), rng);
  critic_ = nn::init_params(cfg_.critic_spec(), rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = nn::AdamState(actor_.size());
  critic_opt_ = nn::AdamState(critic_.size());
}

void Agent::load(nn::ParamVector actor, nn::ParamVector critic, nn::ParamVector target_actor,
                 nn::ParamVector target_critic) {
  if (!(actor.spec() == cfg_.actor_spec()) || !(target_actor.spec() == cfg_.actor_spec()) ||
      !(critic.spec() == cfg_.critic_spec()) || !(target_critic.spec() == cfg_.critic_spec())) {
    throw nn::DimensionError("Agent::load: network shapes do not match the config");
  }
  actor_ = std::move(actor);
  critic_ = std::move(critic);
  target_actor_ = std::move(target_actor);
  target_critic_ = std::move(target_critic);
  actor_opt_ = nn::AdamState(actor_.size());
  critic_opt_ = nn::AdamState(critic_.size());
  actor_opt_.step = actor_.version();
  critic_opt_.step = critic_.version();
}

namespace {

void check_finite(std::span<const double> v, const char* network) {
  std::size_t count = 0;
  std::size_t first = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      if (count++ == 0) first = i;
    }
  }
  if (count > 0) {
    throw NumericalError(std::string("non-finite ") + network + " gradient: " +
                             std::to_string(count) + " elements, first at " + std::to_string(first),
                         network, first, count);
  }
}

}  // namespace

Gradients Agent::compute_gradients(std::span<const Transition> batch) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("train_step: empty batch");
  const int sd = cfg_.state_dim;
  const int ad = cfg_.action_dim;
  const int cd = sd + ad;
  states_.resize(static_cast<std::size_t>(B) * sd);
  next_states_.resize(static_cast<std::size_t>(B) * sd);
  sa_.resize(static_cast<std::size_t>(B) * cd);
  sa_next_.resize(static_cast<std::size_t>(B) * cd);
  sa_pi_.resize(static_cast<std::size_t>(B) * cd);
  for (int r = 0; r < B; ++r) {
    const Transition& t = batch[r];
    if (static_cast<int>(t.state.size()) != sd || static_cast<int>(t.next_state.size()) != sd ||
        static_cast<int>(t.action.size()) != ad) {
      throw nn::DimensionError("train_step: transition dims do not match the agent");
    }
    std::copy(t.state.begin(), t.state.end(), states_.begin() + r * sd);
    std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + r * sd);
    std::copy(t.state.begin(), t.state.end(), sa_.begin() + r * cd);
    std::copy(t.action.begin(), t.action.end(), sa_.begin() + r * cd + sd);
    std::copy(t.next_state.begin(), t.next_state.end(), sa_next_.begin() + r * cd);
    std::copy(t.state.begin(), t.state.end(), sa_pi_.begin() + r * cd);
  }

  Gradients g;

  // Bellman targets from the frozen target networks.
  nn::forward_batch(target_actor_, next_states_, B, ws_target_actor_);
  auto a_next = ws_target_actor_.output();
  for (int r = 0; r < B; ++r) {
    std::copy(a_next.begin() + r * ad, a_next.begin() + (r + 1) * ad,
              sa_next_.begin() + r * cd + sd);
  }
  nn::forward_batch(target_critic_, sa_next_, B, ws_target_critic_);
  auto q_next = ws_target_critic_.output();

  nn::forward_batch(critic_, sa_, B, ws_critic_);
  auto q = ws_critic_.output();
  dq_.resize(B);
  double loss = 0.0;
  double qsum = 0.0;
  for (int r = 0; r < B; ++r) {
    const double y = critic_target(batch[r].reward, batch[r].terminal, q_next[r], cfg_.gamma);
    const double e = q[r] - y;
    loss += e * e;
    qsum += q[r];
    dq_[r] = 2.0 * e / B;
  }
  g.critic_loss = loss / B;
  g.mean_q = qsum / B;
  if (!std::isfinite(g.critic_loss)) {
    throw NumericalError("non-finite critic loss", "critic", 0, 1);
  }
  g.critic.resize(critic_.size());
  nn::backward_batch(critic_, ws_critic_, dq_, g.critic, {});
  check_finite(g.critic, "critic");

  // Actor: ascend mean Q(s, pi(s)) through the critic.
  nn::forward_batch(actor_, states_, B, ws_actor_);
  auto a_pi = ws_actor_.output();
  for (int r = 0; r < B; ++r) {
    std::copy(a_pi.begin() + r * ad, a_pi.begin() + (r + 1) * ad, sa_pi_.begin() + r * cd + sd);
  }
  nn::forward_batch(critic_, sa_pi_, B, ws_critic_pi_);
  dq_.assign(B, -1.0 / B);
  dsa_.resize(static_cast<std::size_t>(B) * cd);
  std::vector<double> unused(critic_.size());
  nn::backward_batch(critic_, ws_critic_pi_, dq_, unused, dsa_);
  da_.resize(static_cast<std::size_t>(B) * ad);
  for (int r = 0; r < B; ++r) {
    std::copy(dsa_.begin() + r * cd + sd, dsa_.begin() + (r + 1) * cd, da_.begin() + r * ad);
  }
  g.actor.resize(actor_.size());
  nn::backward_batch(actor_, ws_actor_, da_, g.actor, {});
  check_finite(g.actor, "actor");
  return g;
}

TrainStats Agent::train_step(std::span<const Transition> batch) {
  Gradients g = compute_gradients(batch);
  const double critic_lr = cfg_.critic_lr(critic_opt_.step);
  const double actor_lr = cfg_.actor_lr(actor_opt_.step);
  nn::adam_step(critic_, g.critic, critic_opt_, critic_lr);
  nn::adam_step(actor_, g.actor, actor_opt_, actor_lr);
  target_update(critic_, target_critic_, cfg_.tau);
  target_update(actor_, target_actor_, cfg_.tau);
  return TrainStats{g.critic_loss, g.mean_q};
}

ActionRepeater::ActionRepeater(int action_repeat) : repeat_(action_repeat) {
  if (action_repeat <= 0) throw std::invalid_argument("ActionRepeater: repeat must be positive");
}

void ActionRepeater::reset() { cached_.clear(); }

std::vector<double> ActionRepeater::act(const nn::ParamVector& actor,
                                        std::span<const double> observation, int step_index,
                                        const NoiseHook& noise) {
  if (static_cast<int>(observation.size()) != actor.spec().input_dim) {
    throw nn::DimensionError("act: observation length does not match the actor");
  }
  if (cached_.empty() || is_decision_step(step_index)) {
    cached_ = nn::predict(actor, observation);
    if (noise) noise(cached_);
    for (double& a : cached_) a = std::clamp(a, 0.0, 1.0);
    ++fresh_;
  }
  return cached_;
}

}  // namespace skelrun::ddpg
