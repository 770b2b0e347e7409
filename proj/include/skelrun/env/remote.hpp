#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include "skelrun/env/channel.hpp"
#include "skelrun/env/protocol.hpp"

namespace skelrun::env {

// Endpoint grammar:
//   tcp://HOST:PORT
//   exec:COMMAND                 child process speaking the protocol on stdio
//   loopback[:ENV[:FAULT]]       in-process server thread; ENV is mock
//                                (default) or runner; FAULT is one of
//                                wrong_obs_dim, malformed, wrong_cmd, slow=MS
std::unique_ptr<LineChannel> open_endpoint(const std::string& endpoint,
                                           std::chrono::milliseconds connect_timeout =
                                               std::chrono::seconds(10));

struct RemoteOptions {
  std::chrono::milliseconds timeout{60'000};
  // Relativize observations on this side. Rejected if the server already does.
  bool relativize = false;
};

class RemoteEnv final : public Environment {
 public:
  // Connects and performs the spec handshake.
  explicit RemoteEnv(std::string endpoint, RemoteOptions options = {});
  ~RemoteEnv() override;

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  // Reconnects first if an earlier failure broke the connection.
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  void close();

  bool broken() const { return channel_ == nullptr; }
  bool server_relativizes() const { return server_relativized_; }

 private:
  void connect();
  nlohmann::json request(const nlohmann::json& req);
  std::vector<double> read_obs(const nlohmann::json& resp);
  [[noreturn]] void fail(const std::string& why);

  std::string endpoint_;
  RemoteOptions options_;
  std::unique_ptr<LineChannel> channel_;
  EnvDescriptor descriptor_;
  bool server_relativized_ = false;
};

}  // namespace skelrun::env
