#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "arrival/geometry.hpp"
#include "arrival/propagator.hpp"

namespace arrival {

struct TimeWindow {
  double lo = 0.0;   // s
  double hi = 0.0;   // s
};

struct ArrivalStats {
  double total = 0.0;              // trapezoid integral of w1 over the window
  std::optional<double> mean;      // s, moments of w1 / total; empty when total < 1e-9
  std::optional<double> stddev;    // s
  std::optional<double> mode;      // s
  TimeWindow window;
  double clipped = 0.0;            // most negative w1 value clipped to zero
};

// Each node carries a histogram bin reaching halfway to its neighbours, so
// the bin masses sum to the trapezoid integral. Within a bin the density is
// taken as uniform. Negative w1 below -tolerance * max|w1| is rejected.
ArrivalStats arrival_stats(const std::vector<double>& t, const std::vector<double>& w1,
                           std::optional<TimeWindow> window = {}, double tolerance = 1e-6);

struct CurveComparison {
  double linf = 0.0;
  double l2 = 0.0;             // s^(1/2) times the curve unit
  double linf_relative = 0.0;  // divided by the larger peak |value| on the window
  double l2_relative = 0.0;    // divided by peak * sqrt(window length)
  double peak = 0.0;
  TimeWindow window;
  std::size_t nodes = 0;
};

// Both curves are piecewise linear in t; the distance is evaluated exactly
// on the union of their nodes inside the shared window.
CurveComparison compare_curves(const std::vector<double>& ta, const std::vector<double>& a,
                               const std::vector<double>& tb, const std::vector<double>& b,
                               std::optional<TimeWindow> window = {});

// Linear interpolation; zero outside [t.front(), t.back()].
double interpolate_series(const std::vector<double>& t, const std::vector<double>& y, double at);

// detected = 1 - P0(t_end); reflected = mass left of the region; transmitted =
// mass right of a finite region. For a half line the undetected mass inside
// counts as transmitted. Warns when mass inside a finite region, or the
// transmitted mass of a half line, exceeds `inside_threshold`.
MassSplit mass_accounting(const ConditionalTrajectory& trajectory, const Sensitivity1D& region,
                          double inside_threshold = 1e-3);

}  // namespace arrival
