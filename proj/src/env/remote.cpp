#include "skelrun/env/remote.hpp"

#include <cmath>
#include <thread>

#include "skelrun/core/format.hpp"
#include "skelrun/env/mock_env.hpp"
#include "skelrun/env/symmetric_runner.hpp"

namespace skelrun::env {

using nlohmann::json;

namespace {

// Client end of a socket pair whose other end is served by a thread.
class LoopbackChannel final : public LineChannel {
 public:
  LoopbackChannel(std::unique_ptr<Environment> env, ServeOptions options) : env_(std::move(env)) {
    auto [client, server] = make_socket_pair();
    client_ = std::move(client);
    server_ = std::move(server);
    thread_ = std::thread([this, options] { serve_connection(*env_, *server_, options); });
  }
  ~LoopbackChannel() override { close(); }

  void write_line(std::string_view line) override { client_->write_line(line); }
  std::string read_line(std::chrono::milliseconds timeout) override {
    return client_->read_line(timeout);
  }
  void close() override {
    client_->close();
    if (thread_.joinable()) thread_.join();
    server_->close();
  }

 private:
  std::unique_ptr<Environment> env_;
  std::unique_ptr<FdChannel> client_;
  std::unique_ptr<FdChannel> server_;
  std::thread thread_;
};

std::vector<double> require_obs(const json& j) {
  if (!j.contains("obs") || !j["obs"].is_array()) throw ProtocolError("response lacks an 'obs' array");
  std::vector<double> obs;
  obs.reserve(j["obs"].size());
  for (const json& v : j["obs"]) {
    if (!v.is_number()) throw ProtocolError("observation element is not a number");
    obs.push_back(v.get<double>());
  }
  return obs;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::unique_ptr<LineChannel> open_loopback(const std::string& spec) {
  auto parts = split(spec, ':');  // parts[0] == "loopback"
  const std::string env_name = parts.size() > 1 && !parts[1].empty() ? parts[1] : "mock";
  ServeOptions opts;
  std::unique_ptr<Environment> env;
  if (env_name == "mock") {
    env = std::make_unique<MockEnv>();
  } else if (env_name == "runner") {
    env = std::make_unique<SymmetricRunner>();
    opts.relativized = true;
  } else {
    throw std::invalid_argument("unknown loopback environment '" + env_name + "'");
  }
  if (parts.size() > 2) {
    const std::string& f = parts[2];
    if (f == "wrong_obs_dim") {
      opts.fault = ServerFault::kWrongObsDim;
    } else if (f == "malformed") {
      opts.fault = ServerFault::kMalformedResponse;
    } else if (f == "wrong_cmd") {
      opts.fault = ServerFault::kWrongCommand;
    } else if (f.rfind("slow=", 0) == 0) {
      opts.fault = ServerFault::kSlowStep;
      opts.step_delay = std::chrono::milliseconds(parse_int<int>(f.substr(5)));
    } else if (!f.empty()) {
      throw std::invalid_argument("unknown loopback fault '" + f + "'");
    }
  }
  return std::make_unique<LoopbackChannel>(std::move(env), opts);
}

}  // namespace

std::unique_ptr<LineChannel> open_endpoint(const std::string& endpoint,
                                           std::chrono::milliseconds connect_timeout) {
  if (endpoint.rfind("tcp://", 0) == 0) {
    const std::string rest = endpoint.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("tcp endpoint needs HOST:PORT");
    return connect_tcp(rest.substr(0, colon), parse_int<int>(rest.substr(colon + 1)),
                       connect_timeout);
  }
  if (endpoint.rfind("exec:", 0) == 0) return spawn_process(endpoint.substr(5));
  if (endpoint == "loopback" || endpoint.rfind("loopback:", 0) == 0) return open_loopback(endpoint);
  throw std::invalid_argument("unrecognized endpoint '" + endpoint + "'");
}

RemoteEnv::RemoteEnv(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  connect();
}

RemoteEnv::~RemoteEnv() {
  try {
    close();
  } catch (...) {
  }
}

void RemoteEnv::close() {
  if (!channel_) return;
  try {
    channel_->write_line(json{{"cmd", "close"}}.dump());
    channel_->read_line(std::chrono::milliseconds(1000));
  } catch (const EnvError&) {
  }
  channel_->close();
  channel_.reset();
}

void RemoteEnv::fail(const std::string& why) {
  if (channel_) {
    channel_->close();
    channel_.reset();
  }
  throw ProtocolError(why);
}

void RemoteEnv::connect() {
  const bool reconnect = !descriptor_.action_low.empty();
  channel_ = open_endpoint(endpoint_);
  json resp = request(json{{"cmd", "spec"}});
  EnvDescriptor d;
  try {
    d = descriptor_from_json(resp);
  } catch (const ProtocolError& e) {
    fail(e.what());
  }
  server_relativized_ = resp.value("relativized", false);
  if (options_.relativize && server_relativized_) {
    fail("handshake: both sides are configured to relativize observations");
  }
  if (options_.relativize && !d.pelvis_x_index) {
    fail("handshake: relativize requested but the server reports no pelvis_x_index");
  }
  if (reconnect && !(d == descriptor_)) fail("handshake: descriptor changed across reconnect");
  descriptor_ = std::move(d);
}

json RemoteEnv::request(const json& req) {
  if (!channel_) throw EnvError("remote connection is broken; reset to reconnect");
  std::string line;
  try {
    channel_->write_line(req.dump());
    line = channel_->read_line(options_.timeout);
  } catch (const EnvError&) {
    channel_->close();
    channel_.reset();
    throw;
  }
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    fail(std::string("malformed response: ") + e.what());
  }
  if (!resp.is_object()) fail("response is not a JSON object");
  if (resp.contains("error")) {
    throw RemoteEnvError("server error: " + resp["error"].dump());
  }
  const std::string sent = req["cmd"].get<std::string>();
  if (resp.contains("cmd") && resp["cmd"] != sent) {
    fail("response to '" + sent + "' is tagged '" + resp["cmd"].dump() + "'");
  }
  return resp;
}

std::vector<double> RemoteEnv::read_obs(const json& resp) {
  std::vector<double> obs;
  try {
    obs = require_obs(resp);
  } catch (const ProtocolError& e) {
    fail(e.what());
  }
  if (static_cast<int>(obs.size()) != descriptor_.obs_dim) {
    fail("observation has " + std::to_string(obs.size()) + " elements, descriptor says " +
         std::to_string(descriptor_.obs_dim));
  }
  for (double v : obs) {
    if (!std::isfinite(v)) fail("observation contains a non-finite value");
  }
  return options_.relativize ? relativize(obs, descriptor_) : obs;
}

std::vector<double> RemoteEnv::reset(std::uint64_t seed) {
  if (!channel_) connect();
  json resp = request(json{{"cmd", "reset"}, {"seed", seed}});
  if (resp.contains("reward") || resp.contains("obs_dim")) fail("reset answered with another shape");
  return read_obs(resp);
}

StepResult RemoteEnv::step(std::span<const double> action) {
  if (static_cast<int>(action.size()) != descriptor_.act_dim) {
    throw std::invalid_argument("RemoteEnv: action length mismatch");
  }
  json resp = request(json{{"cmd", "step"}, {"action", std::vector<double>(action.begin(), action.end())}});
  if (!resp.contains("reward") || !resp["reward"].is_number()) fail("step response lacks 'reward'");
  if (!resp.contains("done") || !resp["done"].is_boolean()) fail("step response lacks 'done'");
  StepResult r;
  r.observation = read_obs(resp);
  r.reward = resp["reward"].get<double>();
  r.terminal = resp["done"].get<bool>();
  if (resp.contains("info") && resp["info"].is_object()) {
    for (const auto& [k, v] : resp["info"].items()) {
      if (v.is_number()) r.info[k] = v.get<double>();
    }
  }
  return r;
}

}  // namespace skelrun::env
