#pragma once

// Learning curves from metrics rows: per configuration, the median
// noise-free return across seeds against wallclock, with an interquartile
// band. Each seed contributes its latest evaluation at every time point.

#include <string>
#include <vector>

#include "skelrun/harness/metrics.hpp"

namespace skelrun::harness {

struct Curve {
  std::string config;
  std::vector<double> time;
  std::vector<double> median;
  std::vector<double> q25;
  std::vector<double> q75;
};

struct SummaryRow {
  std::string config;
  std::size_t seeds = 0;
  double median_best = 0.0;
  double q25_best = 0.0;
  double q75_best = 0.0;
};

struct CurveSet {
  std::vector<Curve> curves;        // sorted by config
  std::vector<SummaryRow> summary;  // sorted by median_best, descending
};

// Linear-interpolated quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> v, double q);

CurveSet build_curves(const std::vector<MetricsRow>& rows);
std::string render_svg(const CurveSet& set);
std::string render_summary(const CurveSet& set);

}  // namespace skelrun::harness
