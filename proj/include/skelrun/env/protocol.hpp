#pragma once

// Wire protocol for remote environments: one JSON object per line, one
// request/response pair at a time.
//
//   {"cmd":"spec"}                  -> {"obs_dim","act_dim","max_steps","action_low","action_high"}
//   {"cmd":"reset","seed":int}      -> {"obs":[...]}
//   {"cmd":"step","action":[...]}   -> {"obs":[...],"reward":x,"done":b,"info":{...}}
//   {"cmd":"close"}                 -> {"ok":true}
//
// Failures are reported as {"error":"..."}. Our server also echoes "cmd" and
// may add optional descriptor fields (reflection, pelvis_x_index,
// relative_x_indices, relativized); readers ignore fields they do not know.

#include <chrono>
#include <string>

#include "json.hpp"
#include "skelrun/env/channel.hpp"
#include "skelrun/env/environment.hpp"

namespace skelrun::env {

class ProtocolError : public EnvError {
 public:
  using EnvError::EnvError;
};

// The server reported {"error": ...}; the connection is still usable.
class RemoteEnvError : public EnvError {
 public:
  using EnvError::EnvError;
};

nlohmann::json descriptor_to_json(const EnvDescriptor& d);
// Throws ProtocolError on missing or ill-typed required fields.
EnvDescriptor descriptor_from_json(const nlohmann::json& j);

// Deliberate misbehaviour for exercising client-side validation.
enum class ServerFault {
  kNone,
  kWrongObsDim,       // step/reset observations carry one extra element
  kMalformedResponse, // step replies with a line that is not JSON
  kWrongCommand,      // step replies with a reset-shaped response
  kSlowStep,          // step sleeps for step_delay before replying
};

struct ServeOptions {
  ServerFault fault = ServerFault::kNone;
  std::chrono::milliseconds step_delay{0};
  // Advertised in the spec response when the server relativizes.
  bool relativized = false;
};

// Serves one connection until "close" or EOF.
void serve_connection(Environment& env, LineChannel& channel, const ServeOptions& options = {});

}  // namespace skelrun::env
