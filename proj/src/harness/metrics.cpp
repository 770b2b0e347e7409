#include "skelrun/harness/metrics.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "skelrun/core/format.hpp"

namespace skelrun::harness {

namespace {

bool valid_role(const std::string& r) { return r == "sampler" || r == "tester" || r == "final"; }
bool valid_mode(const std::string& m) { return m == "action" || m == "param" || m == "none"; }
bool valid_label(const std::string& s) {
  return !s.empty() && s.find_first_of(",\"\n\r") == std::string::npos;
}

}  // namespace

MetricsRow to_row(const parallel::EpisodeStats& st, const std::string& algo,
                  const std::string& config, std::uint64_t seed) {
  return MetricsRow{st.wallclock_s,   st.worker_role, st.worker_id, st.weight_version,
                    st.episode_steps, st.return_unscaled, explore::to_string(st.noise_mode),
                    st.sigma,         st.sigma_p,     algo,         config,
                    seed};
}

std::string format_row(const MetricsRow& r) {
  if (!valid_role(r.worker_role) || !valid_mode(r.noise_mode) || !valid_label(r.algo) ||
      !valid_label(r.config)) {
    throw std::invalid_argument("format_row: row does not fit the schema");
  }
  std::string s;
  s += format_double(r.wallclock_s) + ',';
  s += r.worker_role + ',';
  s += std::to_string(r.worker_id) + ',';
  s += std::to_string(r.weight_version) + ',';
  s += std::to_string(r.episode_steps) + ',';
  s += format_double(r.return_unscaled) + ',';
  s += r.noise_mode + ',';
  s += format_double(r.sigma) + ',';
  s += format_double(r.sigma_p) + ',';
  s += r.algo + ',';
  s += r.config + ',';
  s += std::to_string(r.seed);
  return s;
}

MetricsWriter::MetricsWriter(std::ostream& out) : out_(out) { out_ << kMetricsHeader << '\n'; }

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_row(row) << '\n';
  out_.flush();
}

void MetricsWriter::write(const parallel::EpisodeStats& st, const std::string& algo,
                          const std::string& config, std::uint64_t seed) {
  write(to_row(st, algo, config, seed));
}

MetricsRow parse_row(const std::string& text, std::size_t line) {
  std::vector<std::string> f;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!text.empty() && text.back() == ',') f.push_back("");
  if (f.size() != 12) {
    throw CsvError("expected 12 fields, found " + std::to_string(f.size()), line);
  }
  MetricsRow r;
  auto num = [&](const std::string& s, const char* name) {
    try {
      const double v = parse_double(s);
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
      return v;
    } catch (const std::invalid_argument&) {
      throw CsvError(std::string(name) + " is not a finite number: '" + s + "'", line);
    }
  };
  auto integer = [&]<typename T>(const std::string& s, const char* name, T) {
    try {
      return parse_int<T>(s);
    } catch (const std::invalid_argument&) {
      throw CsvError(std::string(name) + " is not an integer: '" + s + "'", line);
    }
  };
  r.wallclock_s = num(f[0], "wallclock_s");
  if (r.wallclock_s < 0.0) throw CsvError("wallclock_s is negative", line);
  r.worker_role = f[1];
  if (!valid_role(r.worker_role)) throw CsvError("unknown worker_role '" + f[1] + "'", line);
  r.worker_id = integer(f[2], "worker_id", int{});
  r.weight_version = integer(f[3], "weight_version", std::uint64_t{});
  r.episode_steps = integer(f[4], "episode_steps", int{});
  if (r.episode_steps < 0 || r.worker_id < 0) throw CsvError("negative count", line);
  r.return_unscaled = num(f[5], "return_unscaled");
  r.noise_mode = f[6];
  if (!valid_mode(r.noise_mode)) throw CsvError("unknown noise_mode '" + f[6] + "'", line);
  r.sigma = num(f[7], "sigma");
  r.sigma_p = num(f[8], "sigma_p");
  r.algo = f[9];
  if (r.algo != "ddpg" && r.algo != "ppo") throw CsvError("unknown algo '" + f[9] + "'", line);
  r.config = f[10];
  if (!valid_label(r.config)) throw CsvError("empty config label", line);
  r.seed = integer(f[11], "seed", std::uint64_t{});
  return r;
}

std::vector<MetricsRow> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw CsvError("header does not match the metrics schema", 1);
  std::vector<MetricsRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_row(line, n));
  }
  return rows;
}

}  // namespace skelrun::harness
