#pragma once

// Newline-delimited text channels over file descriptors: TCP sockets,
// socket pairs, and the stdio pipes of a child process.

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "skelrun/env/environment.hpp"

namespace skelrun::env {

class ChannelClosed : public EnvError {
 public:
  using EnvError::EnvError;
};

class RemoteTimeout : public EnvError {
 public:
  using EnvError::EnvError;
};

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  // Appends the newline.
  virtual void write_line(std::string_view line) = 0;
  // Throws RemoteTimeout when no full line arrives in time, ChannelClosed on EOF.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

class FdChannel : public LineChannel {
 public:
  // Takes ownership of both descriptors (which may be the same socket).
  FdChannel(int read_fd, int write_fd, int child_pid = -1);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_line(std::string_view line) override;
  std::string read_line(std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  int read_fd_;
  int write_fd_;
  int child_pid_;
  std::string buffer_;
};

std::pair<std::unique_ptr<FdChannel>, std::unique_ptr<FdChannel>> make_socket_pair();

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port,
                                         std::chrono::milliseconds timeout);

// Runs `command` under /bin/sh and talks to it over its stdin/stdout.
std::unique_ptr<LineChannel> spawn_process(const std::string& command);

// Channel over this process's own stdin/stdout (server side of a pipe).
std::unique_ptr<LineChannel> stdio_channel();

class TcpListener {
 public:
  // port 0 picks a free port.
  TcpListener(const std::string& host, int port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<LineChannel> accept(std::chrono::milliseconds timeout);

 private:
  int fd_;
  int port_;
};

}  // namespace skelrun::env
