#include "skelrun/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace skelrun::harness {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty data");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

CurveSet build_curves(const std::vector<MetricsRow>& rows) {
  // config -> seed -> (time, return) in file order
  std::map<std::string, std::map<std::uint64_t, std::vector<std::pair<double, double>>>> evals;
  for (const auto& r : rows) {
    if (r.worker_role == "sampler") continue;
    evals[r.config][r.seed].emplace_back(r.wallclock_s, r.return_unscaled);
  }
  CurveSet set;
  for (auto& [config, seeds] : evals) {
    Curve c;
    c.config = config;
    std::set<double> grid;
    std::vector<double> bests;
    for (auto& [seed, pts] : seeds) {
      std::stable_sort(pts.begin(), pts.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double best = pts.front().second;
      for (const auto& [t, v] : pts) {
        grid.insert(t);
        best = std::max(best, v);
      }
      bests.push_back(best);
    }
    for (double t : grid) {
      std::vector<double> vals;
      for (const auto& [seed, pts] : seeds) {
        const double* latest = nullptr;
        for (const auto& p : pts) {
          if (p.first <= t) latest = &p.second;
        }
        if (latest) vals.push_back(*latest);
      }
      c.time.push_back(t);
      c.median.push_back(quantile(vals, 0.5));
      c.q25.push_back(quantile(vals, 0.25));
      c.q75.push_back(quantile(vals, 0.75));
    }
    set.curves.push_back(std::move(c));
    set.summary.push_back(SummaryRow{config, bests.size(), quantile(bests, 0.5),
                                     quantile(bests, 0.25), quantile(bests, 0.75)});
  }
  std::stable_sort(set.summary.begin(), set.summary.end(),
                   [](const SummaryRow& a, const SummaryRow& b) {
                     return a.median_best > b.median_best;
                   });
  return set;
}

namespace {

constexpr double kW = 800, kH = 480, kLeft = 70, kRight = 190, kTop = 30, kBottom = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}

}  // namespace

std::string render_svg(const CurveSet& set) {
  double tmax = 0.0, ymin = 0.0, ymax = 1.0;
  bool any = false;
  for (const auto& c : set.curves) {
    for (std::size_t i = 0; i < c.time.size(); ++i) {
      tmax = std::max(tmax, c.time[i]);
      if (!any) {
        ymin = c.q25[i];
        ymax = c.q75[i];
        any = true;
      }
      ymin = std::min(ymin, c.q25[i]);
      ymax = std::max(ymax, c.q75[i]);
    }
  }
  if (tmax <= 0.0) tmax = 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  auto X = [&](double t) { return kLeft + pw * t / tmax; };
  auto Y = [&](double v) { return kTop + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\""
     << kTop + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kTop + ph << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = tmax * k / 4.0;
    const double v = ymin + (ymax - ymin) * k / 4.0;
    os << "<text x=\"" << num(X(t)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
       << num(t) << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(Y(v) + 4) << "\" text-anchor=\"end\">"
       << num(v) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">wallclock (s)</text>\n";
  os << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << kTop + ph / 2 << ")\">test return</text>\n";

  for (std::size_t ci = 0; ci < set.curves.size(); ++ci) {
    const Curve& c = set.curves[ci];
    const char* color = kColors[ci % (sizeof(kColors) / sizeof(kColors[0]))];
    if (c.time.empty()) continue;
    os << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.time.size(); ++i) os << num(X(c.time[i])) << ',' << num(Y(c.q75[i])) << ' ';
    for (std::size_t i = c.time.size(); i-- > 0;) os << num(X(c.time[i])) << ',' << num(Y(c.q25[i])) << ' ';
    os << "\"/>\n";
    os << "<polyline class=\"median\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.time.size(); ++i) {
      os << num(X(c.time[i])) << ',' << num(Y(c.median[i])) << (i + 1 < c.time.size() ? " " : "");
    }
    os << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(ci);
    os << "<rect x=\"" << kLeft + pw + 14 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << kLeft + pw + 32 << "\" y=\"" << ly + 10 << "\">" << escape(c.config)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_summary(const CurveSet& set) {
  std::ostringstream os;
  os << "config           seeds  median_best     q25_best     q75_best\n";
  for (const auto& r : set.summary) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %5zu %12.3f %12.3f %12.3f\n", r.config.c_str(), r.seeds,
                  r.median_best, r.q25_best, r.q75_best);
    os << line;
  }
  return os.str();
}

}  // namespace skelrun::harness
