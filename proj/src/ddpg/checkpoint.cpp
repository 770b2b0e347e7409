#include "skelrun/ddpg/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace skelrun::ddpg {

namespace {
constexpr const char* kMagic = "skelrun-checkpoint 1";
}

void write_checkpoint(std::ostream& out, const Agent& agent,
                      const std::map<std::string, std::string>& extra) {
  out << kMagic << '\n';
  auto entries = agent_config_entries(agent.config());
  for (const auto& [k, v] : extra) {
    if (entries.count(k)) throw CheckpointError("extra header key collides: " + k);
    entries[k] = v;
  }
  for (const auto& [k, v] : entries) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("header entry cannot be encoded: " + k);
    }
    out << k << '=' << v << '\n';
  }
  out << "end\n";
  nn::write_params(out, agent.actor());
  nn::write_params(out, agent.critic());
  nn::write_params(out, agent.target_actor());
  nn::write_params(out, agent.target_critic());
  if (!out) throw CheckpointError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError("not a checkpoint file");
  AgentConfig cfg;
  std::map<std::string, std::string> extra;
  for (;;) {
    if (!std::getline(in, line)) throw CheckpointError("truncated checkpoint header");
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("bad header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (!set_agent_config_entry(cfg, key, value)) extra[key] = value;
    } catch (const std::invalid_argument& e) {
      throw CheckpointError("bad header value for " + key + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  Checkpoint c{cfg, extra, nn::read_params(in), nn::read_params(in), nn::read_params(in),
               nn::read_params(in)};
  if (!(c.actor.spec() == cfg.actor_spec()) || !(c.target_actor.spec() == cfg.actor_spec()) ||
      !(c.critic.spec() == cfg.critic_spec()) || !(c.target_critic.spec() == cfg.critic_spec())) {
    throw CheckpointError("checkpoint networks do not match its header");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Agent& agent,
                     const std::map<std::string, std::string>& extra) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + tmp);
    write_checkpoint(out, agent, extra);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace skelrun::ddpg
