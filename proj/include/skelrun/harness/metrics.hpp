#pragma once

// Episode metrics CSV. Columns:
//   wallclock_s,worker_role,worker_id,weight_version,episode_steps,
//   return_unscaled,noise_mode,sigma,sigma_p,algo,config,seed

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "skelrun/parallel/workers.hpp"

namespace skelrun::harness {

inline constexpr const char* kMetricsHeader =
    "wallclock_s,worker_role,worker_id,weight_version,episode_steps,return_unscaled,noise_mode,"
    "sigma,sigma_p,algo,config,seed";

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct MetricsRow {
  double wallclock_s = 0.0;
  std::string worker_role;
  int worker_id = 0;
  std::uint64_t weight_version = 0;
  int episode_steps = 0;
  double return_unscaled = 0.0;
  std::string noise_mode;
  double sigma = 0.0;
  double sigma_p = 0.0;
  std::string algo;
  std::string config;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRow&) const = default;
};

class MetricsWriter {
 public:
  // Writes the header immediately.
  explicit MetricsWriter(std::ostream& out);
  void write(const parallel::EpisodeStats& st, const std::string& algo, const std::string& config,
             std::uint64_t seed);
  void write(const MetricsRow& row);

 private:
  std::ostream& out_;
};

std::string format_row(const MetricsRow& row);
MetricsRow to_row(const parallel::EpisodeStats& st, const std::string& algo,
                  const std::string& config, std::uint64_t seed);

// Validates one data line; line is used for diagnostics.
MetricsRow parse_row(const std::string& text, std::size_t line);
// Header and every row must validate. Throws CsvError at the first problem.
std::vector<MetricsRow> read_metrics(std::istream& in);

}  // namespace skelrun::harness
