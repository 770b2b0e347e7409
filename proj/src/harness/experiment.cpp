#include "skelrun/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "skelrun/core/format.hpp"
#include "skelrun/ddpg/checkpoint.hpp"
#include "skelrun/harness/ppo_runner.hpp"

namespace skelrun::harness {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double activation_gap(const std::vector<parallel::EpisodeStats>& episodes,
                      const symmetry::ReflectionMap& reflection) {
  double left = 0.0;
  double right = 0.0;
  double steps = 0.0;
  for (const auto& e : episodes) {
    if (e.mean_action.size() != reflection.action_perm.size() || e.episode_steps <= 0) continue;
    for (std::size_t i = 0; i < e.mean_action.size(); ++i) {
      const int j = reflection.action_perm[i];
      if (j > static_cast<int>(i)) left += e.mean_action[i] * e.episode_steps;
      if (j < static_cast<int>(i)) right += e.mean_action[i] * e.episode_steps;
    }
    steps += e.episode_steps;
  }
  if (steps == 0.0) return std::numeric_limits<double>::quiet_NaN();
  left /= steps;
  right /= steps;
  const double mean = 0.5 * (left + right);
  return mean == 0.0 ? 0.0 : std::abs(left - right) / mean;
}

RunSummary run(const ExperimentConfig& cfg, std::uint64_t seed, const RunOutputs& out,
               const std::function<void(const MetricsRow&)>& on_row) {
  cfg.validate();
  RunSummary s;
  s.config = cfg.algo == "ppo" ? "ppo" : cfg.label();
  s.seed = seed;

  std::ofstream csv;
  std::optional<MetricsWriter> writer;
  if (!out.csv.empty()) {
    csv.open(out.csv);
    if (!csv) throw std::runtime_error("cannot write " + out.csv.string());
    writer.emplace(csv);
  }
  auto on_episode = [&](const parallel::EpisodeStats& st) {
    MetricsRow row = to_row(st, cfg.algo, s.config, seed);
    if (writer) writer->write(row);
    if (on_row) on_row(row);
    s.rows.push_back(std::move(row));
  };

  parallel::RunResult result;
  if (cfg.algo == "ppo") {
    result = run_ppo(cfg, seed, on_episode, out.checkpoint);
  } else {
    result = parallel::run_topology(make_topology(cfg, seed), on_episode);
    if (!out.checkpoint.empty()) {
      ddpg::save_checkpoint(out.checkpoint, *result.agent,
                            {{"run.seed", std::to_string(seed)}, {"run.config", s.config}});
    }
  }

  s.best_return = -std::numeric_limits<double>::infinity();
  std::vector<parallel::EpisodeStats> finals;
  for (const auto& e : result.episodes) {
    if (e.worker_role == "sampler" || e.faulted) continue;
    s.best_return = std::max(s.best_return, e.return_unscaled);
    if (e.worker_role == "final") finals.push_back(e);
  }
  if (std::isinf(s.best_return)) s.best_return = std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& e : finals) sum += e.return_unscaled;
  s.final_return = finals.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / finals.size();
  s.activation_gap = activation_gap(finals, make_env_factory(cfg)()->descriptor().reflection);
  s.env_steps = result.env_steps;
  s.train_steps = result.trainer.train_steps;
  s.publications = result.trainer.publications;
  s.elapsed_s = result.elapsed_s;
  return s;
}

std::vector<std::string> ablation_labels() {
  return {"noise+flip", "LN+flip", "LN+noise", "LN+noise+flip"};
}

namespace {

template <typename F>
double median_of(const std::vector<RunSummary>& runs, F f) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(f(r));
  return median(std::move(v));
}

}  // namespace

double AblationCell::median_best() const {
  return median_of(runs, [](const RunSummary& r) { return r.best_return; });
}
double AblationCell::median_final() const {
  return median_of(runs, [](const RunSummary& r) { return r.final_return; });
}
double AblationCell::median_gap() const {
  return median_of(runs, [](const RunSummary& r) { return r.activation_gap; });
}

std::vector<AblationCell> run_ablation(const ExperimentConfig& base,
                                       const std::filesystem::path& out_dir,
                                       const std::function<void(const RunSummary&)>& on_run) {
  base.validate();
  if (base.algo != "ddpg") throw ConfigError("ablation needs algo=ddpg");
  std::vector<AblationCell> cells{
      {"noise+flip", false, true, true, {}},
      {"LN+flip", true, false, true, {}},
      {"LN+noise", true, true, false, {}},
      {"LN+noise+flip", true, true, true, {}},
  };
  for (auto& cell : cells) {
    ExperimentConfig cfg = base;
    cfg.layer_norm = cell.layer_norm;
    cfg.param_noise = cell.param_noise;
    cfg.flip = cell.flip;
    for (std::uint64_t seed : base.seeds) {
      RunOutputs out;
      if (!out_dir.empty()) {
        std::string stem = cell.label + "_seed" + std::to_string(seed);
        std::replace(stem.begin(), stem.end(), '+', '_');
        out.csv = out_dir / (stem + ".csv");
      }
      cell.runs.push_back(run(cfg, seed, out));
      if (on_run) on_run(cell.runs.back());
    }
  }
  return cells;
}

std::string ablation_report(const std::vector<AblationCell>& cells) {
  std::vector<const AblationCell*> order;
  for (const auto& c : cells) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const AblationCell* a, const AblationCell* b) {
    return a->median_best() > b->median_best();
  });
  std::ostringstream os;
  os << "rank  cell            median_best  median_final  median_gap  seeds\n";
  int rank = 1;
  const AblationCell* full = nullptr;
  double best_other = -std::numeric_limits<double>::infinity();
  for (const auto* c : order) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-5d %-15s %11.3f %13.3f %11.3f %6zu\n", rank++,
                  c->label.c_str(), c->median_best(), c->median_final(), c->median_gap(),
                  c->runs.size());
    os << line;
    if (c->layer_norm && c->param_noise && c->flip) {
      full = c;
    } else {
      best_other = std::max(best_other, c->median_best());
    }
  }
  if (full && std::isfinite(best_other)) {
    os << "full combination margin over best other cell: "
       << format_double(full->median_best() - best_other) << '\n';
  }
  return os.str();
}

}  // namespace skelrun::harness
