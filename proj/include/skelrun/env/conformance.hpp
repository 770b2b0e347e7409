#pragma once

// Protocol conformance probe behind the `bridge-check` subcommand.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace skelrun::env {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::string endpoint;
  std::vector<CheckResult> checks;
  bool passed() const;
};

struct ConformanceOptions {
  std::chrono::milliseconds timeout{60'000};
  // How long an idle connection must stay silent.
  std::chrono::milliseconds idle_probe{200};
  std::uint64_t seed = 7;
};

// Ordering, validation and timeout cases against any endpoint. Loopback
// endpoints additionally run client-side fault-injection cases.
ConformanceReport run_bridge_check(const std::string& endpoint,
                                   const ConformanceOptions& options = {});

}  // namespace skelrun::env
