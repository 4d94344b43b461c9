#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arrival/analysis.hpp"
#include "arrival/config.hpp"
#include "arrival/discrete.hpp"
#include "arrival/propagator.hpp"

namespace arrival {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestVersion = 1;

// Quantities derived from a resolved config before any propagation.
struct DerivedQuantities {
  double A = 0.0;                 // s^-1, used by the continuum run
  double shift = 0.0;             // s^-1
  double A_bath = 0.0;            // from the bath spectrum
  double shift_bath = 0.0;
  double A_closed_form = 0.0;
  double shift_closed_form = 0.0;
  double correlation_time = 0.0;  // s
  double recurrence_time = 0.0;   // s
  double k0 = 0.0;                // 1/m
  std::vector<std::string> warnings;

  Json to_json() const;
};

DerivedQuantities derive_quantities(const Json& config);

struct ContinuumRun {
  ConditionalTrajectory trajectory;
  ArrivalStats stats;
  MassSplit split;
  double t_start = 0.0;
};

ContinuumRun run_continuum_case(const Json& config, const DerivedQuantities& derived);

DiscreteDensity run_discrete_case(const Json& config);

struct SpectrumRow {
  double k = 0.0;              // 1/m
  double R0_sq = 0.0;          // elastic reflection probability
  double flip_reflected = 0.0; // flux fraction reflected with a flipped spin
  double transmitted = 0.0;    // flux fraction entering the region
  double flux_defect = 0.0;
};

std::vector<SpectrumRow> discrete_spectrum(const Json& config);

struct FluorescenceRun {
  ConditionalTrajectory two_channel;
  ConditionalTrajectory one_channel;
  CurveComparison comparison;      // on w1 curves each divided by its own integral
  double condition_ratio = 0.0;    // |2 Delta + i gamma| / 2 over max(Omega/2, E_kin/hbar)
  double limit_real_part = 0.0;    // max |Re V| / hbar of the one-channel potential
  double t_start = 0.0;
};

FluorescenceRun run_fluorescence_case(const Json& config);

// Default comparison window [0, window_fraction * t_rec] unless set explicitly.
TimeWindow comparison_window(const Json& config, double recurrence_time);

struct RunOptions {
  std::filesystem::path out = "out";
  unsigned jobs = 0;   // 0 selects the logical core count
};

// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitPartialFailure = 3;

struct RunReport {
  int exit_code = kExitOk;
  Json manifest;
};

// Executes a resolved config and writes manifest.json plus CSV series under options.out.
RunReport run(const Json& config, const RunOptions& options);

}  // namespace arrival
