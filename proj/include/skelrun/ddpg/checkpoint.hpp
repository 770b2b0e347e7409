#pragma once

// Checkpoint file: a text header of canonical key=value lines (the agent
// config) closed by a line "end", followed by the actor, critic, target
// actor and target critic in the binary parameter format.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "skelrun/ddpg/agent.hpp"

namespace skelrun::ddpg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  AgentConfig config;
  // Extra header entries (e.g. run metadata) preserved verbatim.
  std::map<std::string, std::string> extra;
  nn::ParamVector actor;
  nn::ParamVector critic;
  nn::ParamVector target_actor;
  nn::ParamVector target_critic;
};

void write_checkpoint(std::ostream& out, const Agent& agent,
                      const std::map<std::string, std::string>& extra = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Agent& agent,
                     const std::map<std::string, std::string>& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace skelrun::ddpg
