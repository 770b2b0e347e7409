#include "skelrun/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "skelrun/core/format.hpp"
#include "skelrun/env/remote.hpp"

namespace skelrun::harness {

namespace {

std::string b(bool x) { return x ? "true" : "false"; }

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::uint64_t> split_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_int<std::uint64_t>(part));
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Keys of the agent config that the harness derives instead of storing.
bool derived_agent_key(const std::string& k) {
  return k == "ddpg.state_dim" || k == "ddpg.action_dim" || k == "ddpg.layer_norm";
}

}  // namespace

std::string ExperimentConfig::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(layer_norm, "LN");
  add(param_noise, "noise");
  add(flip, "flip");
  return s.empty() ? "plain" : s;
}

void ExperimentConfig::validate() const {
  if (algo != "ddpg" && algo != "ppo") throw ConfigError("algo must be ddpg or ppo");
  if (n_workers < 3) throw ConfigError("n_workers must be at least 3");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (test_every <= 0) throw ConfigError("test_every must be positive");
  if (final_eval_episodes < 0) throw ConfigError("final_eval_episodes must be >= 0");
  if (queue_capacity == 0) throw ConfigError("queue_capacity must be positive");
  if (wallclock_s < 0.0) throw ConfigError("wallclock_s must be >= 0");
  if (!(remote_timeout_s > 0.0)) throw ConfigError("remote.timeout_s must be positive");
  if (!(param_noise_probability >= 0.0 && param_noise_probability <= 1.0)) {
    throw ConfigError("explore.param_noise_probability must lie in [0,1]");
  }
  if (!(sigma_p_initial > 0.0)) throw ConfigError("explore.sigma_p_initial must be positive");
  if (!(param_noise_alpha > 1.0)) throw ConfigError("explore.param_noise_alpha must exceed 1");
  if (ppo_rollout_steps <= 0) throw ConfigError("ppo.rollout_steps must be positive");
  try {
    ou.validate();
    runner.validate();
    ppo.validate();
    ddpg::AgentConfig a = agent;
    a.state_dim = a.state_dim > 0 ? a.state_dim : 1;
    a.action_dim = a.action_dim > 0 ? a.action_dim : 1;
    a.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& c) {
  std::map<std::string, std::string> m{
      {"algo", c.algo},
      {"toggles.layer_norm", b(c.layer_norm)},
      {"toggles.param_noise", b(c.param_noise)},
      {"toggles.flip", b(c.flip)},
      {"run.n_workers", std::to_string(c.n_workers)},
      {"run.env", c.env},
      {"run.seeds", join_seeds(c.seeds)},
      {"run.env_steps", std::to_string(c.env_steps)},
      {"run.wallclock_s", format_double(c.wallclock_s)},
      {"run.deterministic", b(c.deterministic)},
      {"run.test_every", std::to_string(c.test_every)},
      {"run.final_eval_episodes", std::to_string(c.final_eval_episodes)},
      {"run.queue_capacity", std::to_string(c.queue_capacity)},
      {"remote.timeout_s", format_double(c.remote_timeout_s)},
      {"remote.relativize", b(c.remote_relativize)},
      {"explore.ou_theta", format_double(c.ou.theta)},
      {"explore.ou_mu", format_double(c.ou.mu)},
      {"explore.ou_sigma_start", format_double(c.ou.sigma_start)},
      {"explore.ou_sigma_min", format_double(c.ou.sigma_min)},
      {"explore.ou_dt", format_double(c.ou.dt)},
      {"explore.ou_anneal_steps", std::to_string(c.ou.anneal_steps)},
      {"explore.param_noise_probability", format_double(c.param_noise_probability)},
      {"explore.sigma_p_initial", format_double(c.sigma_p_initial)},
      {"explore.param_noise_alpha", format_double(c.param_noise_alpha)},
      {"runner.dt", format_double(c.runner.dt)},
      {"runner.max_torque", format_double(c.runner.max_torque)},
      {"runner.damping", format_double(c.runner.damping)},
      {"runner.stiffness", format_double(c.runner.stiffness)},
      {"runner.speed_gain", format_double(c.runner.speed_gain)},
      {"runner.collapse_gain", format_double(c.runner.collapse_gain)},
      {"runner.recovery_gain", format_double(c.runner.recovery_gain)},
      {"runner.target_height", format_double(c.runner.target_height)},
      {"runner.fall_height", format_double(c.runner.fall_height)},
      {"runner.activation_penalty", format_double(c.runner.activation_penalty)},
      {"runner.obstacle_count", std::to_string(c.runner.obstacle_count)},
      {"runner.radius_min", format_double(c.runner.radius_min)},
      {"runner.radius_max", format_double(c.runner.radius_max)},
      {"runner.spacing_min", format_double(c.runner.spacing_min)},
      {"runner.spacing_max", format_double(c.runner.spacing_max)},
      {"runner.strength_min", format_double(c.runner.strength_min)},
      {"runner.strength_max", format_double(c.runner.strength_max)},
      {"runner.obstacle_slowdown", format_double(c.runner.obstacle_slowdown)},
      {"runner.stride_clearance", format_double(c.runner.stride_clearance)},
      {"runner.max_steps", std::to_string(c.runner.max_steps)},
      {"ppo.clip", format_double(c.ppo.clip)},
      {"ppo.epochs", std::to_string(c.ppo.epochs)},
      {"ppo.minibatch", std::to_string(c.ppo.minibatch)},
      {"ppo.lr", format_double(c.ppo.lr)},
      {"ppo.gamma", format_double(c.ppo.gamma)},
      {"ppo.rollout_steps", std::to_string(c.ppo_rollout_steps)},
  };
  for (auto& [k, v] : ddpg::agent_config_entries(c.agent)) {
    if (!derived_agent_key(k)) m[k] = v;
  }
  return m;
}

void set_entry(ExperimentConfig& c, const std::string& key, const std::string& v) {
  try {
    if (key == "algo") c.algo = v;
    else if (key == "toggles.layer_norm") c.layer_norm = parse_bool(v);
    else if (key == "toggles.param_noise") c.param_noise = parse_bool(v);
    else if (key == "toggles.flip") c.flip = parse_bool(v);
    else if (key == "run.n_workers") c.n_workers = parse_int<int>(v);
    else if (key == "run.env") c.env = v;
    else if (key == "run.seeds") c.seeds = split_seeds(v);
    else if (key == "run.env_steps") c.env_steps = parse_int<std::uint64_t>(v);
    else if (key == "run.wallclock_s") c.wallclock_s = parse_double(v);
    else if (key == "run.deterministic") c.deterministic = parse_bool(v);
    else if (key == "run.test_every") c.test_every = parse_int<int>(v);
    else if (key == "run.final_eval_episodes") c.final_eval_episodes = parse_int<int>(v);
    else if (key == "run.queue_capacity") c.queue_capacity = parse_int<std::size_t>(v);
    else if (key == "remote.timeout_s") c.remote_timeout_s = parse_double(v);
    else if (key == "remote.relativize") c.remote_relativize = parse_bool(v);
    else if (key == "explore.ou_theta") c.ou.theta = parse_double(v);
    else if (key == "explore.ou_mu") c.ou.mu = parse_double(v);
    else if (key == "explore.ou_sigma_start") c.ou.sigma_start = parse_double(v);
    else if (key == "explore.ou_sigma_min") c.ou.sigma_min = parse_double(v);
    else if (key == "explore.ou_dt") c.ou.dt = parse_double(v);
    else if (key == "explore.ou_anneal_steps") c.ou.anneal_steps = parse_int<std::uint64_t>(v);
    else if (key == "explore.param_noise_probability") c.param_noise_probability = parse_double(v);
    else if (key == "explore.sigma_p_initial") c.sigma_p_initial = parse_double(v);
    else if (key == "explore.param_noise_alpha") c.param_noise_alpha = parse_double(v);
    else if (key == "runner.dt") c.runner.dt = parse_double(v);
    else if (key == "runner.max_torque") c.runner.max_torque = parse_double(v);
    else if (key == "runner.damping") c.runner.damping = parse_double(v);
    else if (key == "runner.stiffness") c.runner.stiffness = parse_double(v);
    else if (key == "runner.speed_gain") c.runner.speed_gain = parse_double(v);
    else if (key == "runner.collapse_gain") c.runner.collapse_gain = parse_double(v);
    else if (key == "runner.recovery_gain") c.runner.recovery_gain = parse_double(v);
    else if (key == "runner.target_height") c.runner.target_height = parse_double(v);
    else if (key == "runner.fall_height") c.runner.fall_height = parse_double(v);
    else if (key == "runner.activation_penalty") c.runner.activation_penalty = parse_double(v);
    else if (key == "runner.obstacle_count") c.runner.obstacle_count = parse_int<int>(v);
    else if (key == "runner.radius_min") c.runner.radius_min = parse_double(v);
    else if (key == "runner.radius_max") c.runner.radius_max = parse_double(v);
    else if (key == "runner.spacing_min") c.runner.spacing_min = parse_double(v);
    else if (key == "runner.spacing_max") c.runner.spacing_max = parse_double(v);
    else if (key == "runner.strength_min") c.runner.strength_min = parse_double(v);
    else if (key == "runner.strength_max") c.runner.strength_max = parse_double(v);
    else if (key == "runner.obstacle_slowdown") c.runner.obstacle_slowdown = parse_double(v);
    else if (key == "runner.stride_clearance") c.runner.stride_clearance = parse_double(v);
    else if (key == "runner.max_steps") c.runner.max_steps = parse_int<int>(v);
    else if (key == "ppo.clip") c.ppo.clip = parse_double(v);
    else if (key == "ppo.epochs") c.ppo.epochs = parse_int<int>(v);
    else if (key == "ppo.minibatch") c.ppo.minibatch = parse_int<int>(v);
    else if (key == "ppo.lr") c.ppo.lr = parse_double(v);
    else if (key == "ppo.gamma") c.ppo.gamma = parse_double(v);
    else if (key == "ppo.rollout_steps") c.ppo_rollout_steps = parse_int<int>(v);
    else if (derived_agent_key(key) || !ddpg::set_agent_config_entry(c.agent, key, v)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bad value for " + key + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, int> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (seen.count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    seen[key] = lineno;
    try {
      set_entry(cfg, key, trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
  set_entry(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

env::EnvFactory make_env_factory(const ExperimentConfig& cfg) {
  if (cfg.env == "symmetric_runner") {
    const env::RunnerConfig rc = cfg.runner;
    return [rc] { return std::make_unique<env::SymmetricRunner>(rc); };
  }
  env::RemoteOptions opt;
  opt.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.remote_timeout_s * 1000.0));
  opt.relativize = cfg.remote_relativize;
  const std::string endpoint = cfg.env;
  return [endpoint, opt] { return std::make_unique<env::RemoteEnv>(endpoint, opt); };
}

parallel::TopologyConfig make_topology(const ExperimentConfig& cfg, std::uint64_t seed) {
  parallel::TopologyConfig t;
  t.n_workers = cfg.n_workers;
  t.agent = cfg.agent;
  t.agent.state_dim = 0;
  t.agent.action_dim = 0;
  t.agent.layer_norm = cfg.layer_norm;
  t.sampler.ou = cfg.ou;
  t.sampler.param_noise = cfg.param_noise;
  t.sampler.param_noise_probability = cfg.param_noise_probability;
  t.sampler.sigma_p_initial = cfg.sigma_p_initial;
  t.sampler.alpha = cfg.param_noise_alpha;
  t.flip = cfg.flip;
  t.seed = seed;
  t.env_step_budget = cfg.env_steps;
  t.wallclock_budget_s = cfg.wallclock_s;
  t.deterministic = cfg.deterministic;
  t.test_every = cfg.test_every;
  t.final_eval_episodes = cfg.final_eval_episodes;
  t.queue_capacity = cfg.queue_capacity;
  t.env_factory = make_env_factory(cfg);
  return t;
}

}  // namespace skelrun::harness
