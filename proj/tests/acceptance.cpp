// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "skelrun/ddpg/agent.hpp"
#include "skelrun/env/conformance.hpp"
#include "skelrun/env/symmetric_runner.hpp"
#include "skelrun/explore/noise.hpp"
#include "skelrun/harness/config.hpp"
#include "skelrun/harness/experiment.hpp"
#include "skelrun/nn/mlp.hpp"
#include "skelrun/onpolicy/ppo.hpp"
#include "skelrun/onpolicy/returns.hpp"
#include "skelrun/parallel/topology.hpp"
#include "skelrun/symmetry/reflection.hpp"

using namespace skelrun;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(7001);
  const int n = 24;
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto spec = oracle::sweep_spec(k, rng);
    const auto p = oracle::random_params(spec, rng);
    const auto x = oracle::random_vector(spec.input_dim, rng, -2.0, 2.0);
    const auto w = oracle::random_vector(spec.output_dim, rng);
    const auto fr = nn::forward(p, x);
    const auto br = nn::backward(p, fr.cache, w);
    worst = std::max({worst, oracle::max_rel_error(br.param_grad, oracle::fd_param_grad(p, x, w)),
                      oracle::max_rel_error(br.input_grad, oracle::fd_input_grad(p, x, w))});
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, std::to_string(n) + " networks, max rel error " +
                                           fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome layer_norm_stats() {
  Rng rng(7002);
  double worst_mean = 0.0, worst_var = 0.0;
  int trials = 0;
  while (trials < 10'000) {
    const std::size_t n = 2 + rng() % 128;
    const double scale = std::pow(10.0, uniform(rng, -2.0, 3.0));
    const auto x = oracle::random_vector(n, rng, -scale, scale);
    if (oracle::population_variance(x) < 1e-4) continue;
    ++trials;
    const std::vector<double> g(n, 1.0), b(n, 0.0);
    const auto y = nn::layer_norm(x, g, b, 1e-12);
    worst_mean = std::max(worst_mean, std::abs(oracle::mean(y)));
    worst_var = std::max(worst_var, std::abs(oracle::population_variance(y) - 1.0));
  }
  return {worst_mean < 1e-9 && worst_var < 1e-6,
          std::to_string(trials) + " inputs, max |mean| " + fmt("%.2e", worst_mean) +
              ", max |var-1| " + fmt("%.2e", worst_var)};
}

Outcome ou_process() {
  explore::OuConfig cfg;
  const double sigma = 0.2;
  // Independent dimensions pooled; one chain of 1e6 steps has only ~1e3
  // effective samples at this correlation time.
  const int dims = 18, steps = 1'000'000;
  explore::OuState st(dims, 0.0);
  Rng rng(7003);
  double sum = 0.0, sum2 = 0.0, lag = 0.0;
  std::vector<double> prev(dims, 0.0);
  for (int t = 0; t < steps; ++t) {
    const auto x = explore::ou_step(st, cfg, sigma, rng);
    for (int d = 0; d < dims; ++d) {
      sum += x[d];
      sum2 += x[d] * x[d];
      lag += x[d] * prev[d];
    }
    prev = x;
  }
  const double n = static_cast<double>(steps) * dims;
  const double m = sum / n;
  const double var = sum2 / n - m * m;
  const double sd = std::sqrt(var);
  const double rho = (lag / n - m * m) / var;
  const double expect_sd = oracle::ou_stationary_std(cfg.theta, sigma, cfg.dt);
  const double expect_rho = 1.0 - cfg.theta * cfg.dt;
  const double e_sd = std::abs(sd - expect_sd) / expect_sd;
  const double e_rho = std::abs(rho - expect_rho) / expect_rho;
  return {e_sd < 0.05 && e_rho < 0.02,
          "std " + fmt("%.4f", sd) + " vs " + fmt("%.4f", expect_sd) + " (" +
              fmt("%.2f", 100 * e_sd) + "%) over 18 x 1e6 steps, lag-1 " + fmt("%.5f", rho) + " vs " +
              fmt("%.3f", expect_rho) + " (" + fmt("%.2f", 100 * e_rho) + "%)"};
}

Outcome calibration() {
  Rng rng(7004);
  nn::MlpSpec s{10, {64, 64}, 4, nn::Activation::kElu, nn::Activation::kSigmoid, true};
  const auto actor = nn::init_params(s, rng);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 200; ++i) probes.push_back(oracle::random_vector(10, rng));
  const double alpha = 1.01;
  bool ok = true;
  std::ostringstream detail;
  for (double target : {0.05, 0.075, 0.1, 0.15, 0.2}) {
    explore::ParamNoiseState st{0.1, target, alpha};
    int hit = -1;
    for (int it = 0; it < 200 && hit < 0; ++it) {
      const auto q = explore::perturb_actor(actor, st.sigma_p, rng);
      const double d = explore::policy_distance(actor, q, probes);
      if (d >= target / (alpha * alpha) && d <= target * alpha * alpha) hit = it + 1;
      st = explore::adapt_sigma(st, d, target);
    }
    ok = ok && hit > 0;
    detail << "target " << target << ": " << (hit > 0 ? std::to_string(hit) + " it" : "miss")
           << (target < 0.2 ? ", " : "");
  }
  return {ok, detail.str()};
}

Outcome symmetry_suite() {
  Rng rng(7005);
  const auto m = env::runner_reflection();
  bool involution = true;
  for (int i = 0; i < 10'000; ++i) {
    const auto s = oracle::random_vector(m.state_dim(), rng, -10, 10);
    const auto a = oracle::random_vector(m.action_dim(), rng, 0, 1);
    involution = involution && symmetry::reflect_state(symmetry::reflect_state(s, m), m) == s &&
                 symmetry::reflect_action(symmetry::reflect_action(a, m), m) == a;
  }

  bool equivariant = true;
  int steps = 0;
  for (std::uint64_t seed = 0; seed < 20 && equivariant; ++seed) {
    env::SymmetricRunner a, b;
    a.reset(seed);
    b.reset(seed);
    b.set_state(env::mirror_state(a.state()));
    equivariant = b.observation() == symmetry::reflect_state(a.observation(), m);
    for (int t = 0; t < 1000 && equivariant; ++t) {
      const auto act = oracle::random_vector(4, rng, 0.0, 1.0);
      const auto ra = a.step(act);
      const auto rb = b.step(symmetry::reflect_action(act, m));
      ++steps;
      equivariant = rb.observation == symmetry::reflect_state(ra.observation, m) &&
                    rb.reward == ra.reward && rb.terminal == ra.terminal;
      if (ra.terminal) break;
    }
  }

  ddpg::AgentConfig cfg;
  cfg.state_dim = 10;
  cfg.action_dim = 4;
  ddpg::Agent agent(cfg, 3);
  std::vector<Transition> batch;
  for (int i = 0; i < 100; ++i) {
    Transition t;
    t.state = oracle::random_vector(10, rng);
    t.action = oracle::random_vector(4, rng, 0.0, 1.0);
    t.next_state = oracle::random_vector(10, rng);
    t.reward = uniform(rng, -1, 1);
    t.terminal = rng() % 2;
    batch.push_back(std::move(t));
  }
  const auto doubled = symmetry::augment_batch(batch, m);
  std::vector<Transition> swapped(doubled.begin() + 100, doubled.end());
  swapped.insert(swapped.end(), doubled.begin(), doubled.begin() + 100);
  const double la = agent.compute_gradients(doubled).critic_loss;
  const double lb = agent.compute_gradients(swapped).critic_loss;
  const double swap_err = std::abs(la - lb) / std::max(1.0, std::abs(la));

  return {involution && equivariant && swap_err <= 1e-12,
          std::string("involution ") + (involution ? "exact" : "broken") + " on 1e4 pairs, " +
              "equivariance " + (equivariant ? "exact" : "broken") + " over " +
              std::to_string(steps) + " steps, half-swap loss diff " + fmt("%.1e", swap_err)};
}

Outcome arithmetic() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };
  expect(ddpg::critic_target(1.0, false, 2.0, 0.9) == 1.0 + 0.9 * 2.0, "target r+gq");
  expect(ddpg::critic_target(0.5, true, 123.0, 0.9) == 0.5, "target terminal");
  expect(ddpg::critic_target(0.7, false, 5.0, 0.0) == 0.7, "target gamma 0");
  expect(onpolicy::compute_returns(std::vector<double>{1, 1}, 0.9) ==
             std::vector<double>{1.9, 1.0},
         "returns {1,1}");
  expect(onpolicy::compute_returns(std::vector<double>{1, 1, 1}, 0.5) ==
             std::vector<double>{1.75, 1.5, 1.0},
         "returns {1,1,1}");
  Rng rng(7006);
  const auto r = oracle::random_vector(50, rng);
  const auto R = onpolicy::compute_returns(r, 0.97);
  bool rec = R.back() == r.back();
  for (std::size_t t = 0; t + 1 < R.size(); ++t) rec = rec && R[t] == r[t] + 0.97 * R[t + 1];
  expect(rec, "returns recursion");
  expect(onpolicy::clipped_objective(1.0, 0.37, 0.2) == 0.37, "clip r=1");
  expect(onpolicy::clipped_objective(1.5, 1.0, 0.2) == 1.2, "clip r=1.5 A=+1");
  expect(onpolicy::clipped_objective(0.5, -1.0, 0.2) == -0.8, "clip r=0.5 A=-1");
  std::string detail = failed.empty() ? "9 hand values exact" : "mismatch:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <class T>
std::vector<T> parallel_map(int n, const std::function<T(int)>& fn) {
  const int width = std::max(1u, std::thread::hardware_concurrency());
  std::vector<T> out(n);
  for (int start = 0; start < n; start += width) {
    std::vector<std::future<T>> jobs;
    for (int i = start; i < std::min(n, start + width); ++i)
      jobs.push_back(std::async(std::launch::async, fn, i));
    for (int i = 0; i < static_cast<int>(jobs.size()); ++i) out[start + i] = jobs[i].get();
  }
  return out;
}

harness::ExperimentConfig learning_config() {
  harness::ExperimentConfig c;
  c.n_workers = 8;  // 6 samplers
  c.deterministic = true;
  c.env_steps = 200'000;
  return c;
}

constexpr int kSeeds = 5;

// Mean undiscounted return of a fixed actor over the final-evaluation seeds.
double evaluate_actor(const nn::ParamVector* actor, std::uint64_t run_seed, int episodes) {
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    env::SymmetricRunner env;
    auto obs = env.reset(parallel::final_eval_seed(run_seed, k));
    ddpg::ActionRepeater rep(5);
    for (int t = 0;; ++t) {
      const auto a = actor ? rep.act(*actor, obs, t) : std::vector<double>(env::runner_act::kDim, 0.0);
      const auto r = env.step(a);
      total += r.reward;
      obs = r.observation;
      if (r.terminal) break;
    }
  }
  return total / episodes;
}

std::vector<harness::RunSummary> full_runs;

std::vector<harness::RunSummary> run_cell(const harness::ExperimentConfig& cfg) {
  return parallel_map<harness::RunSummary>(kSeeds, [&](int i) {
    auto s = harness::run(cfg, static_cast<std::uint64_t>(i + 1));
    std::printf("  %s seed %d: best %.2f final %.2f gap %.3f, %.0f s\n", cfg.label().c_str(),
                i + 1, s.best_return, s.final_return, s.activation_gap, s.elapsed_s);
    std::fflush(stdout);
    return s;
  });
}

Outcome learning_smoke() {
  const auto cfg = learning_config();
  const auto t0 = std::chrono::steady_clock::now();
  full_runs = run_cell(cfg);
  const double secs = seconds_since(t0);

  std::vector<double> finals, zero, untrained;
  for (const auto& s : full_runs) finals.push_back(s.final_return);
  for (int i = 0; i < kSeeds; ++i) {
    const auto seed = static_cast<std::uint64_t>(i + 1);
    auto agent_cfg = cfg.agent;
    agent_cfg.state_dim = env::runner_obs::kDim;
    agent_cfg.action_dim = env::runner_act::kDim;
    agent_cfg.layer_norm = cfg.layer_norm;
    const ddpg::Agent fresh(agent_cfg, seed);
    zero.push_back(evaluate_actor(nullptr, seed, cfg.final_eval_episodes));
    untrained.push_back(evaluate_actor(&fresh.actor(), seed, cfg.final_eval_episodes));
  }
  const double med = harness::median(finals);
  const double z = harness::median(zero), u = harness::median(untrained);
  const double floor = std::max(std::abs(z), std::abs(u));
  return {med > 0.0 && med >= 5.0 * floor,
          "median final return " + fmt("%.2f", med) + ", zero policy " + fmt("%.3f", z) +
              ", untrained " + fmt("%.3f", u) + ", " + fmt("%.0f", secs) + " s wall on " +
              std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " core(s)"};
}

Outcome directional_ablation() {
  if (full_runs.empty()) full_runs = run_cell(learning_config());
  auto cfg = learning_config();
  cfg.flip = false;
  const auto no_flip = run_cell(cfg);
  std::vector<double> fb, nb, fg, ng;
  for (const auto& s : full_runs) {
    fb.push_back(s.best_return);
    fg.push_back(s.activation_gap);
  }
  for (const auto& s : no_flip) {
    nb.push_back(s.best_return);
    ng.push_back(s.activation_gap);
  }
  const double mfb = harness::median(fb), mnb = harness::median(nb);
  const double mfg = harness::median(fg), mng = harness::median(ng);
  const double bound = 0.2;
  return {mfb >= mnb && mfg < bound,
          "median best full " + fmt("%.2f", mfb) + " vs no-flip " + fmt("%.2f", mnb) +
              ", median gap full " + fmt("%.3f", mfg) + " (bound " + fmt("%.1f", bound) +
              ") vs no-flip " + fmt("%.3f", mng)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "skelrun_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = learning_config();
  cfg.env_steps = 30'000;
  harness::run(cfg, 11, {dir / "a.csv", {}});
  harness::run(cfg, 11, {dir / "b.csv", {}});
  const auto a = slurp(dir / "a.csv"), b = slurp(dir / "b.csv");
  const auto rows = std::count(a.begin(), a.end(), '\n');
  fs::remove_all(dir);
  return {rows > 1 && a == b, std::to_string(a.size()) + " bytes, " + std::to_string(rows - 1) +
                                  " rows, " + (a == b ? "identical" : "differ")};
}

Outcome protocol_self_test() {
  env::ConformanceOptions opt;
  opt.timeout = std::chrono::seconds(10);
  const auto report = env::run_bridge_check("loopback", opt);
  int passed = 0;
  std::string failures;
  for (const auto& c : report.checks) {
    if (c.passed) ++passed;
    else failures += " " + c.name;
  }
  return {report.passed(), std::to_string(passed) + "/" + std::to_string(report.checks.size()) +
                               " checks passed" + (failures.empty() ? "" : ", failed:" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Criterion> all{
      {1, "gradient fidelity", gradient_fidelity},
      {2, "layer-norm statistics", layer_norm_stats},
      {3, "OU process", ou_process},
      {4, "noise calibration", calibration},
      {5, "symmetry suite", symmetry_suite},
      {6, "arithmetic oracles", arithmetic},
      {7, "learning smoke test", learning_smoke},
      {8, "directional ablation", directional_ablation},
      {9, "determinism", determinism},
      {10, "protocol self-test", protocol_self_test},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
