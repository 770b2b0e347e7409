#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skelrun/harness/config.hpp"
#include "skelrun/harness/metrics.hpp"
#include "skelrun/symmetry/reflection.hpp"

namespace skelrun::harness {

struct RunSummary {
  std::string config;  // toggle label
  std::uint64_t seed = 0;
  // Max return over all noise-free episodes (tester and final).
  double best_return = 0.0;
  // Mean return of the final evaluation episodes.
  double final_return = 0.0;
  // Relative left/right activation gap over the final evaluation episodes.
  double activation_gap = 0.0;
  std::uint64_t env_steps = 0;
  std::uint64_t train_steps = 0;
  std::uint64_t publications = 0;
  double elapsed_s = 0.0;
  std::vector<MetricsRow> rows;
};

// Where run() writes its artifacts. Empty csv/checkpoint paths skip them.
struct RunOutputs {
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
};

// One seed of cfg. Dispatches on cfg.algo.
RunSummary run(const ExperimentConfig& cfg, std::uint64_t seed, const RunOutputs& out = {},
               const std::function<void(const MetricsRow&)>& on_row = {});

// |L - R| / ((L + R) / 2), with L and R the step-weighted mean activation of
// the two action blocks the reflection swaps. 0 when both are 0.
double activation_gap(const std::vector<parallel::EpisodeStats>& episodes,
                      const symmetry::ReflectionMap& reflection);

struct AblationCell {
  std::string label;
  bool layer_norm = true;
  bool param_noise = true;
  bool flip = true;
  std::vector<RunSummary> runs;  // one per seed, in seed order

  double median_best() const;
  double median_final() const;
  double median_gap() const;
};

// Labels of the four cells: the full combination and each leave-one-out.
std::vector<std::string> ablation_labels();

// Runs all four cells over the same seeds. Writes <label>_seed<k>.csv into
// out_dir when it is non-empty.
std::vector<AblationCell> run_ablation(const ExperimentConfig& base,
                                       const std::filesystem::path& out_dir = {},
                                       const std::function<void(const RunSummary&)>& on_run = {});

// Cells ranked by median best return, and the full combination's margin
// over the best other cell.
std::string ablation_report(const std::vector<AblationCell>& cells);

double median(std::vector<double> v);

}  // namespace skelrun::harness
