#include "arrival/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "arrival/errors.hpp"

namespace arrival {

namespace {

void check_series(const std::vector<double>& t, const std::vector<double>& y, const char* name) {
  if (t.size() != y.size()) throw ConfigError(std::string(name) + ": time and value sizes differ");
  if (t.size() < 2) throw ConfigError(std::string(name) + ": need at least two samples");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError(std::string(name) + ": times must be strictly increasing");
  for (double v : y)
    if (!std::isfinite(v)) throw ConfigError(std::string(name) + ": non-finite value");
}

}  // namespace

double interpolate_series(const std::vector<double>& t, const std::vector<double>& y, double at) {
  if (t.empty() || at < t.front() || at > t.back()) return 0.0;
  const auto it = std::lower_bound(t.begin(), t.end(), at);
  const auto j = static_cast<std::size_t>(it - t.begin());
  if (t[j] == at) return y[j];
  const double w = (at - t[j - 1]) / (t[j] - t[j - 1]);
  return (1.0 - w) * y[j - 1] + w * y[j];
}

ArrivalStats arrival_stats(const std::vector<double>& t, const std::vector<double>& w1,
                           std::optional<TimeWindow> window, double tolerance) {
  check_series(t, w1, "arrival_stats");
  ArrivalStats out;
  out.window = window.value_or(TimeWindow{t.front(), t.back()});
  if (!(out.window.hi > out.window.lo)) throw ConfigError("arrival_stats: empty window");

  std::vector<double> tt;
  std::vector<double> ww;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= out.window.lo && t[i] <= out.window.hi) {
      tt.push_back(t[i]);
      ww.push_back(w1[i]);
    }
  }
  if (tt.size() < 2) throw ConfigError("arrival_stats: fewer than two samples in the window");

  double scale = 0.0;
  for (double v : ww) scale = std::max(scale, std::abs(v));
  for (double& v : ww) {
    if (v < 0.0) {
      if (v < -tolerance * scale) {
        std::ostringstream msg;
        msg << "arrival_stats: w1 = " << v << " is negative beyond tolerance " << tolerance << " of the peak";
        throw DomainError(msg.str());
      }
      out.clipped = std::min(out.clipped, v);
      v = 0.0;
    }
  }

  const std::size_t n = tt.size();
  std::vector<double> lo(n), hi(n), mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = i == 0 ? tt[0] : 0.5 * (tt[i - 1] + tt[i]);
    hi[i] = i + 1 == n ? tt[n - 1] : 0.5 * (tt[i] + tt[i + 1]);
    mass[i] = ww[i] * (hi[i] - lo[i]);
    out.total += mass[i];
  }
  if (!(out.total >= 1e-9)) return out;

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += mass[i] * 0.5 * (lo[i] + hi[i]);
  mean /= out.total;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = 0.5 * (lo[i] + hi[i]) - mean;
    const double w = hi[i] - lo[i];
    var += mass[i] * (c * c + w * w / 12.0);
  }
  var /= out.total;
  out.mean = mean;
  out.stddev = std::sqrt(var);

  const auto peak = static_cast<std::size_t>(std::max_element(ww.begin(), ww.end()) - ww.begin());
  double mode = tt[peak];
  if (peak > 0 && peak + 1 < n) {
    // Vertex of the parabola through the three samples around the peak.
    const double x0 = tt[peak - 1], x1 = tt[peak], x2 = tt[peak + 1];
    const double y0 = ww[peak - 1], y1 = ww[peak], y2 = ww[peak + 1];
    const double d = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
    if (a < 0.0) mode = std::clamp(-b / (2.0 * a), x0, x2);
  }
  out.mode = mode;
  return out;
}

CurveComparison compare_curves(const std::vector<double>& ta, const std::vector<double>& a,
                               const std::vector<double>& tb, const std::vector<double>& b,
                               std::optional<TimeWindow> window) {
  check_series(ta, a, "compare_curves (a)");
  check_series(tb, b, "compare_curves (b)");
  CurveComparison out;
  double lo = std::max(ta.front(), tb.front());
  double hi = std::min(ta.back(), tb.back());
  if (window) {
    lo = std::max(lo, window->lo);
    hi = std::min(hi, window->hi);
  }
  if (!(hi > lo)) throw ConfigError("compare_curves: the curves share no time window");
  out.window = {lo, hi};

  std::vector<double> nodes{lo, hi};
  for (double x : ta)
    if (x > lo && x < hi) nodes.push_back(x);
  for (double x : tb)
    if (x > lo && x < hi) nodes.push_back(x);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  out.nodes = nodes.size();

  std::vector<double> d(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double va = interpolate_series(ta, a, nodes[i]);
    const double vb = interpolate_series(tb, b, nodes[i]);
    d[i] = va - vb;
    out.peak = std::max({out.peak, std::abs(va), std::abs(vb)});
    out.linf = std::max(out.linf, std::abs(d[i]));
  }
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    s += (nodes[i + 1] - nodes[i]) * (d[i] * d[i] + d[i] * d[i + 1] + d[i + 1] * d[i + 1]) / 3.0;
  out.l2 = std::sqrt(s);
  if (out.peak > 0.0) {
    out.linf_relative = out.linf / out.peak;
    out.l2_relative = out.l2 / (out.peak * std::sqrt(hi - lo));
  }
  return out;
}

MassSplit mass_accounting(const ConditionalTrajectory& trajectory, const Sensitivity1D& region,
                          double inside_threshold) {
  if (trajectory.final_state.empty() || trajectory.P0.empty())
    throw ConfigError("mass_accounting: trajectory has no final state");
  MassSplit out;
  const Grid1D& g = trajectory.grid;
  const double start = region.region_start();
  const double end = region.region_end();
  const double dx = g.spacing();
  for (const auto& channel : trajectory.final_state) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = std::norm(channel[i]) * dx;
      const double x = g.x(i);
      if (x < start)
        out.reflected += p;
      else if (x > end)
        out.transmitted_undetected += p;
      else
        out.inside += p;
    }
  }
  out.detected = 1.0 - trajectory.P0.back();
  const double inside = out.inside;
  if (region.is_half_line()) {
    out.transmitted_undetected += out.inside;
    out.inside = 0.0;
  }
  out.residual = 1.0 - out.detected - out.reflected - out.transmitted_undetected - out.inside;
  if (inside > inside_threshold) {
    std::ostringstream msg;
    msg << "undetected mass " << inside << " remains inside the detector region at t_end";
    out.warnings.push_back(msg.str());
  }
  return out;
}

}  // namespace arrival
