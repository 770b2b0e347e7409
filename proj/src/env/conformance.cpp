#include "skelrun/env/conformance.hpp"

#include <bit>
#include <cmath>
#include <functional>

#include "skelrun/env/remote.hpp"

namespace skelrun::env {

using nlohmann::json;

bool ConformanceReport::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

namespace {

// A check body returns a detail string on success and throws on failure.
void run_check(ConformanceReport& report, const std::string& name,
               const std::function<std::string()>& body) {
  CheckResult r{name, false, ""};
  try {
    r.detail = body();
    r.passed = true;
  } catch (const std::exception& e) {
    r.detail = e.what();
  }
  report.checks.push_back(std::move(r));
}

void expect(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

json exchange(LineChannel& ch, const std::string& line, std::chrono::milliseconds timeout) {
  ch.write_line(line);
  return json::parse(ch.read_line(timeout));
}

std::vector<double> midpoint(const EnvDescriptor& d) {
  std::vector<double> a(d.act_dim);
  for (int i = 0; i < d.act_dim; ++i) a[i] = 0.5 * (d.action_low[i] + d.action_high[i]);
  return a;
}

template <typename Ex, typename F>
std::string expect_throw(F&& f, const std::string& what) {
  try {
    f();
  } catch (const Ex& e) {
    return std::string("raised as expected: ") + e.what();
  }
  throw std::runtime_error(what);
}

}  // namespace

ConformanceReport run_bridge_check(const std::string& endpoint, const ConformanceOptions& opt) {
  ConformanceReport report;
  report.endpoint = endpoint;
  RemoteOptions ropt;
  ropt.timeout = opt.timeout;

  std::unique_ptr<RemoteEnv> env;
  run_check(report, "handshake_descriptor", [&] {
    env = std::make_unique<RemoteEnv>(endpoint, ropt);
    const auto& d = env->descriptor();
    return "obs_dim=" + std::to_string(d.obs_dim) + " act_dim=" + std::to_string(d.act_dim) +
           " max_steps=" + std::to_string(d.max_steps);
  });
  if (!env) return report;
  const EnvDescriptor d = env->descriptor();

  run_check(report, "reset_observation", [&] {
    auto obs = env->reset(opt.seed);
    expect(static_cast<int>(obs.size()) == d.obs_dim, "wrong observation length");
    return std::string("ok");
  });
  run_check(report, "reset_deterministic", [&] {
    auto a = env->reset(opt.seed);
    auto b = env->reset(opt.seed);
    expect(a == b, "two resets with the same seed differ");
    return std::string("ok");
  });
  run_check(report, "step_response_shape", [&] {
    env->reset(opt.seed);
    auto r = env->step(midpoint(d));
    expect(std::isfinite(r.reward), "reward is not finite");
    return std::string("ok");
  });
  int episode_len = 0;
  run_check(report, "episode_terminates_within_max_steps", [&] {
    env->reset(opt.seed);
    const auto a = midpoint(d);
    bool done = false;
    episode_len = 0;
    while (!done) {
      done = env->step(a).terminal;
      ++episode_len;
      expect(episode_len <= d.max_steps, "episode ran past max_steps");
    }
    return "length " + std::to_string(episode_len);
  });
  run_check(report, "step_after_done_rejected", [&] {
    return expect_throw<RemoteEnvError>([&] { env->step(midpoint(d)); },
                                        "server accepted a step after the episode ended");
  });
  run_check(report, "step_before_reset_rejected", [&] {
    RemoteEnv fresh(endpoint, ropt);
    return expect_throw<RemoteEnvError>([&] { fresh.step(midpoint(d)); },
                                        "server accepted a step before any reset");
  });
  run_check(report, "malformed_request_rejected", [&] {
    auto ch = open_endpoint(endpoint);
    json r = exchange(*ch, "this is not json", opt.timeout);
    expect(r.contains("error"), "no error response to a malformed request");
    json s = exchange(*ch, json{{"cmd", "spec"}}.dump(), opt.timeout);
    expect(s.contains("obs_dim"), "connection unusable after a malformed request");
    ch->close();
    return std::string("error returned, connection survived");
  });
  run_check(report, "unknown_cmd_rejected", [&] {
    auto ch = open_endpoint(endpoint);
    json r = exchange(*ch, json{{"cmd", "dance"}}.dump(), opt.timeout);
    expect(r.contains("error"), "no error response to an unknown cmd");
    ch->close();
    return std::string("ok");
  });
  run_check(report, "wrong_action_length_rejected", [&] {
    auto ch = open_endpoint(endpoint);
    exchange(*ch, json{{"cmd", "reset"}, {"seed", opt.seed}}.dump(), opt.timeout);
    std::vector<double> bad(d.act_dim + 1, 0.5);
    json r = exchange(*ch, json{{"cmd", "step"}, {"action", bad}}.dump(), opt.timeout);
    expect(r.contains("error"), "server accepted an action of the wrong length");
    ch->close();
    return std::string("ok");
  });
  run_check(report, "close_acknowledged", [&] {
    auto ch = open_endpoint(endpoint);
    json r = exchange(*ch, json{{"cmd", "close"}}.dump(), opt.timeout);
    expect(r.value("ok", false) == true, "close not acknowledged with ok:true");
    ch->close();
    return std::string("ok");
  });
  run_check(report, "idle_timeout_signaled", [&] {
    auto ch = open_endpoint(endpoint);
    const auto t0 = std::chrono::steady_clock::now();
    std::string out = expect_throw<RemoteTimeout>([&] { ch->read_line(opt.idle_probe); },
                                                  "server sent data without a request");
    const auto waited = std::chrono::steady_clock::now() - t0;
    expect(waited >= opt.idle_probe && waited < opt.idle_probe + std::chrono::seconds(2),
           "timeout fired outside its deadline");
    ch->close();
    return out;
  });
  run_check(report, "float_round_trip", [&] {
    auto ch = open_endpoint(endpoint);
    json r = exchange(*ch, json{{"cmd", "reset"}, {"seed", opt.seed}}.dump(), opt.timeout);
    const auto obs = r.at("obs").get<std::vector<double>>();
    const auto again = json::parse(json(obs).dump()).get<std::vector<double>>();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      expect(std::bit_cast<std::uint64_t>(obs[i]) == std::bit_cast<std::uint64_t>(again[i]),
             "double did not survive a serialization round trip");
    }
    ch->close();
    return std::to_string(obs.size()) + " values bit-exact";
  });
  env.reset();

  if (endpoint == "loopback" || endpoint.rfind("loopback:", 0) == 0) {
    run_check(report, "detects_wrong_obs_dim", [&] {
      RemoteEnv bad("loopback:mock:wrong_obs_dim", ropt);
      std::string out = expect_throw<ProtocolError>([&] { bad.reset(opt.seed); },
                                                    "oversized observation accepted");
      expect(bad.broken(), "connection left open after a protocol error");
      return out;
    });
    run_check(report, "detects_malformed_response", [&] {
      RemoteEnv bad("loopback:mock:malformed", ropt);
      bad.reset(opt.seed);
      std::string out = expect_throw<ProtocolError>([&] { bad.step(std::vector<double>(2, 0.5)); },
                                                    "malformed response accepted");
      expect(bad.broken(), "connection left open after a malformed response");
      return out;
    });
    run_check(report, "detects_wrong_command_response", [&] {
      RemoteEnv bad("loopback:mock:wrong_cmd", ropt);
      bad.reset(opt.seed);
      return expect_throw<ProtocolError>([&] { bad.step(std::vector<double>(2, 0.5)); },
                                         "response to the wrong cmd accepted");
    });
    run_check(report, "step_timeout_signaled", [&] {
      RemoteOptions fast = ropt;
      fast.timeout = std::chrono::milliseconds(100);
      RemoteEnv slow("loopback:mock:slow=400", fast);
      slow.reset(opt.seed);
      std::string out = expect_throw<RemoteTimeout>([&] { slow.step(std::vector<double>(2, 0.5)); },
                                                    "slow step did not time out");
      expect(slow.broken(), "connection not flagged after a timeout");
      slow.reset(opt.seed);
      expect(!slow.broken(), "reset did not reconnect after a timeout");
      return out + "; reconnected";
    });
    run_check(report, "double_relativization_rejected", [&] {
      RemoteOptions rel = ropt;
      rel.relativize = true;
      return expect_throw<ProtocolError>([&] { RemoteEnv both("loopback:runner", rel); },
                                         "handshake allowed relativization on both sides");
    });
  }
  return report;
}

}  // namespace skelrun::env
