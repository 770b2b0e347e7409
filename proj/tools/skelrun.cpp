// skelrun command-line entry point.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "skelrun/core/format.hpp"
#include "skelrun/env/conformance.hpp"
#include "skelrun/env/mock_env.hpp"
#include "skelrun/env/protocol.hpp"
#include "skelrun/env/symmetric_runner.hpp"
#include "skelrun/harness/config.hpp"
#include "skelrun/harness/experiment.hpp"
#include "skelrun/harness/plot.hpp"

namespace fs = std::filesystem;
using namespace skelrun;

namespace {

fs::path default_out_dir() {
  const char* env = std::getenv("SKELRUN_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

harness::ExperimentConfig resolve_config(const std::string& path,
                                         const std::vector<std::string>& overrides,
                                         bool deterministic) {
  harness::ExperimentConfig cfg = path.empty() ? harness::ExperimentConfig{}
                                               : harness::load_config(path);
  for (const auto& o : overrides) harness::apply_override(cfg, o);
  if (deterministic) cfg.deterministic = true;
  cfg.validate();
  return cfg;
}

void print_summary(const harness::RunSummary& s) {
  std::cout << s.config << " seed=" << s.seed << " best=" << format_double(s.best_return)
            << " final=" << format_double(s.final_return)
            << " gap=" << format_double(s.activation_gap) << " env_steps=" << s.env_steps
            << " train_steps=" << s.train_steps << " elapsed_s=" << format_double(s.elapsed_s)
            << std::endl;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              bool deterministic, fs::path out_dir) {
  const auto cfg = resolve_config(config_path, overrides, deterministic);
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "config.txt") << harness::serialize_config(cfg);
  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
  harness::MetricsWriter writer(csv);
  for (std::uint64_t seed : cfg.seeds) {
    harness::RunOutputs out;
    out.checkpoint = out_dir / ("checkpoint_seed" + std::to_string(seed) + ".ckpt");
    auto s = harness::run(cfg, seed, out, [&](const harness::MetricsRow& r) { writer.write(r); });
    print_summary(s);
  }
  std::cout << "wrote " << (out_dir / "metrics.csv").string() << std::endl;
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides,
               bool deterministic, int n_seeds, fs::path out_dir) {
  auto cfg = resolve_config(config_path, overrides, deterministic);
  if (n_seeds > 0) {
    cfg.seeds.clear();
    for (int k = 1; k <= n_seeds; ++k) cfg.seeds.push_back(static_cast<std::uint64_t>(k));
  }
  if (cfg.seeds.size() < 5) std::cerr << "warning: fewer than 5 seeds" << std::endl;
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "config.txt") << harness::serialize_config(cfg);
  const auto cells = harness::run_ablation(cfg, out_dir, print_summary);
  {
    std::ofstream csv(out_dir / "ablation.csv");
    harness::MetricsWriter writer(csv);
    for (const auto& c : cells)
      for (const auto& r : c.runs)
        for (const auto& row : r.rows) writer.write(row);
  }
  const std::string report = harness::ablation_report(cells);
  std::ofstream(out_dir / "ablation.txt") << report;
  std::cout << report;
  return 0;
}

int cmd_plot(const std::string& in, const std::string& out, const std::string& summary_path) {
  std::ifstream f(in);
  if (!f) throw std::runtime_error("cannot open " + in);
  const auto rows = harness::read_metrics(f);
  const auto set = harness::build_curves(rows);
  std::ofstream(out) << harness::render_svg(set);
  const std::string table = harness::render_summary(set);
  std::cout << table;
  if (!summary_path.empty()) std::ofstream(summary_path) << table;
  if (set.curves.empty()) {
    std::cerr << "warning: no evaluation rows in " << in << "; wrote empty axes" << std::endl;
    return 2;
  }
  return 0;
}

int cmd_bridge_check(const std::string& endpoint, int timeout_ms) {
  env::ConformanceOptions opt;
  opt.timeout = std::chrono::milliseconds(timeout_ms);
  const auto report = env::run_bridge_check(endpoint, opt);
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  }
  const bool ok = report.passed();
  std::cout << (ok ? "all checks passed" : "conformance FAILED") << std::endl;
  return ok ? 0 : 1;
}

std::unique_ptr<env::Environment> make_served_env(const std::string& name) {
  if (name == "mock") return std::make_unique<env::MockEnv>();
  if (name == "runner") return std::make_unique<env::SymmetricRunner>();
  throw std::invalid_argument("unknown environment '" + name + "' (mock, runner)");
}

int cmd_serve(const std::string& env_name, const std::string& listen, bool stdio) {
  env::ServeOptions opt;
  opt.relativized = env_name == "runner";
  if (stdio) {
    auto e = make_served_env(env_name);
    auto ch = env::stdio_channel();
    env::serve_connection(*e, *ch, opt);
    return 0;
  }
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--listen needs HOST:PORT");
  env::TcpListener listener(listen.substr(0, colon), parse_int<int>(listen.substr(colon + 1)));
  std::cout << "listening on " << listen.substr(0, colon) << ":" << listener.port() << std::endl;
  for (;;) {
    std::shared_ptr<env::LineChannel> ch;
    try {
      ch = listener.accept(std::chrono::hours(24));
    } catch (const env::RemoteTimeout&) {
      continue;
    }
    std::thread([ch, env_name, opt] {
      auto e = make_served_env(env_name);
      env::serve_connection(*e, *ch, opt);
    }).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skelrun: DDPG with layer norm, parameter noise and mirrored batches"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool deterministic = false;
  std::string out_dir = default_out_dir().string();

  auto* train = app.add_subcommand("train", "Train one configuration over its seeds");
  train->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  train->add_option("--set", overrides, "Override, key=value (repeatable)");
  train->add_flag("--deterministic", deterministic, "Round-robin single-thread scheduling");
  train->add_option("--out", out_dir, "Output directory (default $SKELRUN_OUT_DIR or ./runs)");

  int n_seeds = 0;
  auto* ablate = app.add_subcommand("ablate", "Full combination and leave-one-out cells");
  ablate->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  ablate->add_option("--seeds", n_seeds, "Use seeds 1..N")->check(CLI::PositiveNumber);
  ablate->add_option("--set", overrides, "Override, key=value (repeatable)");
  ablate->add_flag("--deterministic", deterministic, "Round-robin single-thread scheduling");
  ablate->add_option("--out", out_dir, "Output directory (default $SKELRUN_OUT_DIR or ./runs)");

  std::string in_csv, out_svg, summary_path;
  auto* plot = app.add_subcommand("plot", "Learning curves and best-return table from a CSV");
  plot->add_option("--in", in_csv, "Metrics CSV")->required();
  plot->add_option("--out", out_svg, "SVG to write")->required();
  plot->add_option("--summary", summary_path, "Also write the table here");

  std::string endpoint;
  int timeout_ms = 10'000;
  auto* check = app.add_subcommand("bridge-check", "Protocol conformance probe");
  check->add_option("--endpoint", endpoint, "tcp://HOST:PORT, exec:CMD or loopback[:...]")
      ->required();
  check->add_option("--timeout-ms", timeout_ms, "Per-request timeout");

  std::string serve_env = "mock", listen = "127.0.0.1:0";
  bool stdio = false;
  auto* serve = app.add_subcommand("serve", "Serve a built-in environment over the wire protocol");
  serve->add_option("--env", serve_env, "mock or runner");
  serve->add_option("--listen", listen, "HOST:PORT (port 0 picks one)");
  serve->add_flag("--stdio", stdio, "Serve one connection on stdin/stdout");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config_path, overrides, deterministic, out_dir);
    if (*ablate) return cmd_ablate(config_path, overrides, deterministic, n_seeds, out_dir);
    if (*plot) return cmd_plot(in_csv, out_svg, summary_path);
    if (*check) return cmd_bridge_check(endpoint, timeout_ms);
    if (*serve) return cmd_serve(serve_env, listen, stdio);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
