#include "skelrun/env/protocol.hpp"

#include <thread>

namespace skelrun::env {

using nlohmann::json;

json descriptor_to_json(const EnvDescriptor& d) {
  json j;
  j["obs_dim"] = d.obs_dim;
  j["act_dim"] = d.act_dim;
  j["max_steps"] = d.max_steps;
  j["action_low"] = d.action_low;
  j["action_high"] = d.action_high;
  j["reflection"] = {{"state_perm", d.reflection.state_perm},
                     {"state_sign", d.reflection.state_sign},
                     {"action_perm", d.reflection.action_perm}};
  if (d.pelvis_x_index) j["pelvis_x_index"] = *d.pelvis_x_index;
  j["relative_x_indices"] = d.relative_x_indices;
  return j;
}

namespace {

template <typename T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ProtocolError(std::string("response lacks required field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

}  // namespace

EnvDescriptor descriptor_from_json(const json& j) {
  EnvDescriptor d;
  d.obs_dim = require<int>(j, "obs_dim");
  d.act_dim = require<int>(j, "act_dim");
  d.max_steps = require<int>(j, "max_steps");
  d.action_low = require<std::vector<double>>(j, "action_low");
  d.action_high = require<std::vector<double>>(j, "action_high");
  if (d.obs_dim <= 0 || d.act_dim <= 0) throw ProtocolError("descriptor dims must be positive");
  d.reflection = symmetry::ReflectionMap::identity(d.obs_dim, d.act_dim);
  try {
    if (j.contains("reflection") && j["reflection"].is_object()) {
      const json& r = j["reflection"];
      d.reflection.state_perm = r.at("state_perm").get<std::vector<int>>();
      d.reflection.state_sign = r.at("state_sign").get<std::vector<int>>();
      d.reflection.action_perm = r.at("action_perm").get<std::vector<int>>();
    }
    if (j.contains("pelvis_x_index") && !j["pelvis_x_index"].is_null()) {
      d.pelvis_x_index = j["pelvis_x_index"].get<int>();
    }
    if (j.contains("relative_x_indices")) {
      d.relative_x_indices = j["relative_x_indices"].get<std::vector<int>>();
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad optional descriptor field: ") + e.what());
  }
  try {
    d.validate();
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("invalid descriptor: ") + e.what());
  }
  return d;
}

namespace {

json error_response(const std::string& msg) { return json{{"error", msg}}; }

std::vector<double> with_fault(std::vector<double> obs, const ServeOptions& opt) {
  if (opt.fault == ServerFault::kWrongObsDim) obs.push_back(0.0);
  return obs;
}

}  // namespace

namespace {

void serve_loop(Environment& env, LineChannel& channel, const ServeOptions& options) {
  bool episode_open = false;
  for (;;) {
    std::string line;
    try {
      line = channel.read_line(std::chrono::hours(24 * 365));
    } catch (const ChannelClosed&) {
      return;
    }
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception& e) {
      channel.write_line(error_response(std::string("malformed request: ") + e.what()).dump());
      continue;
    }
    if (!req.is_object() || !req.contains("cmd") || !req["cmd"].is_string()) {
      channel.write_line(error_response("request lacks a string 'cmd'").dump());
      continue;
    }
    const std::string cmd = req["cmd"].get<std::string>();
    json resp;
    try {
      if (cmd == "spec") {
        resp = descriptor_to_json(env.descriptor());
        if (options.relativized) resp["relativized"] = true;
      } else if (cmd == "reset") {
        if (!req.contains("seed") || !req["seed"].is_number_integer()) {
          throw std::invalid_argument("reset needs an integer 'seed'");
        }
        const auto seed = req["seed"].is_number_unsigned()
                              ? req["seed"].get<std::uint64_t>()
                              : static_cast<std::uint64_t>(req["seed"].get<std::int64_t>());
        resp["obs"] = with_fault(env.reset(seed), options);
        episode_open = true;
      } else if (cmd == "step") {
        if (!episode_open) throw EpisodeStateError("step without an open episode; send reset");
        if (!req.contains("action") || !req["action"].is_array()) {
          throw std::invalid_argument("step needs an 'action' array");
        }
        const auto action = req["action"].get<std::vector<double>>();
        if (static_cast<int>(action.size()) != env.descriptor().act_dim) {
          throw std::invalid_argument("action has " + std::to_string(action.size()) +
                                      " elements, expected " +
                                      std::to_string(env.descriptor().act_dim));
        }
        if (options.fault == ServerFault::kSlowStep) std::this_thread::sleep_for(options.step_delay);
        StepResult r = env.step(action);
        episode_open = !r.terminal;
        if (options.fault == ServerFault::kMalformedResponse) {
          channel.write_line("{\"obs\": [1, 2,");
          continue;
        }
        if (options.fault == ServerFault::kWrongCommand) {
          channel.write_line(json{{"cmd", "reset"}, {"obs", r.observation}}.dump());
          continue;
        }
        resp["obs"] = with_fault(std::move(r.observation), options);
        resp["reward"] = r.reward;
        resp["done"] = r.terminal;
        resp["info"] = r.info;
      } else if (cmd == "close") {
        channel.write_line(json{{"cmd", "close"}, {"ok", true}}.dump());
        return;
      } else {
        throw std::invalid_argument("unknown cmd '" + cmd + "'");
      }
    } catch (const ChannelClosed&) {
      throw;
    } catch (const std::exception& e) {
      channel.write_line(error_response(e.what()).dump());
      continue;
    }
    resp["cmd"] = cmd;
    channel.write_line(resp.dump());
  }
}

}  // namespace

void serve_connection(Environment& env, LineChannel& channel, const ServeOptions& options) {
  try {
    serve_loop(env, channel, options);
  } catch (const ChannelClosed&) {
    // The client went away mid-reply.
  }
}

}  // namespace skelrun::env
