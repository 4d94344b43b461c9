#include "arrival/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <thread>

#include "arrival/bath.hpp"
#include "arrival/csv.hpp"
#include "arrival/errors.hpp"
#include "arrival/units.hpp"

namespace arrival {
namespace fs = std::filesystem;
namespace {

double num(const Json& cfg, const std::string& path) { return at_path(cfg, path).get<double>(); }
std::optional<double> opt_num(const Json& cfg, const std::string& path) {
  const Json& v = at_path(cfg, path);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}
std::size_t count(const Json& cfg, const std::string& path) {
  return static_cast<std::size_t>(at_path(cfg, path).get<long long>());
}

ExampleBathParams bath_params(const Json& cfg) {
  ExampleBathParams p;
  p.G = num(cfg, "bath.G");
  p.omega_max = num(cfg, "bath.omega_max");
  p.modes = count(cfg, "bath.modes");
  p.c0 = num(cfg, "bath.c0");
  return p;
}

Grid1D grid_from(const Json& cfg, const std::string& block, double k0) {
  const Grid1D grid = Grid1D::with_max_spacing(num(cfg, block + ".x_min"), num(cfg, block + ".x_max"),
                                               num(cfg, block + ".spacing"));
  if (!grid.resolves(k0))
    throw ConfigError(block + ".spacing: fewer than 8 points per wavelength at the mean wavenumber");
  return grid;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json stats_json(const ArrivalStats& s) {
  return Json{{"total", s.total},
              {"mean", optional_json(s.mean)},
              {"stddev", optional_json(s.stddev)},
              {"mode", optional_json(s.mode)},
              {"window", {s.window.lo, s.window.hi}},
              {"clipped", s.clipped}};
}

Json split_json(const MassSplit& s) {
  return Json{{"detected", s.detected},
              {"reflected", s.reflected},
              {"transmitted_undetected", s.transmitted_undetected},
              {"inside", s.inside},
              {"residual", s.residual}};
}

Json comparison_json(const CurveComparison& c) {
  return Json{{"linf", c.linf},
              {"l2", c.l2},
              {"linf_relative", c.linf_relative},
              {"l2_relative", c.l2_relative},
              {"peak", c.peak},
              {"window", {c.window.lo, c.window.hi}},
              {"nodes", c.nodes}};
}

Json trajectory_json(const ConditionalTrajectory& tr) {
  return Json{{"dt", tr.dt},
              {"steps", tr.t.empty() ? 0 : tr.t.size() - 1},
              {"nodes", tr.grid.size()},
              {"carrier_wavenumber", tr.carrier_wavenumber},
              {"final_P0", tr.P0.empty() ? 0.0 : tr.P0.back()},
              {"norm_balance", tr.norm_balance},
              {"integral_balance", tr.integral_balance},
              {"w1_form_discrepancy", tr.w1_form_discrepancy},
              {"max_norm_increase", tr.max_norm_increase},
              {"max_edge_mass", tr.max_edge_mass},
              {"validity_note", tr.validity_note}};
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from, const std::string& tag) {
  for (const auto& w : from) to.push_back(tag + ": " + w);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const Json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_trajectory_csv(const fs::path& path, const ConditionalTrajectory& tr, std::size_t stride,
                          bool excited_column) {
  auto out = open_out(path);
  std::vector<std::string> header{"t", "P0", "w1"};
  if (excited_column) header.push_back("excited_norm");
  CsvWriter csv(out, header);
  const std::size_t n = tr.t.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i % stride != 0 && i + 1 != n) continue;
    std::vector<double> row{tr.t[i], tr.P0[i], tr.w1[i]};
    if (excited_column) row.push_back(tr.channel_norm.at(1)[i]);
    csv.row(row);
  }
}

void write_snapshots(const fs::path& dir, const ConditionalTrajectory& tr) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "times.csv");
    CsvWriter csv(out, {"index", "t"});
    for (std::size_t s = 0; s < tr.snapshot_times.size(); ++s)
      csv.row({static_cast<double>(s), tr.snapshot_times[s]});
  }
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "field_%04zu.csv", s);
    auto out = open_out(dir / name);
    std::vector<std::string> header{"x"};
    for (std::size_t c = 0; c < tr.channels; ++c) {
      header.push_back("re_psi" + std::to_string(c));
      header.push_back("im_psi" + std::to_string(c));
    }
    CsvWriter csv(out, header);
    for (std::size_t i = 0; i < tr.grid.size(); ++i) {
      std::vector<double> row{tr.grid.x(i)};
      for (std::size_t c = 0; c < tr.channels; ++c) {
        row.push_back(tr.snapshots[s][c][i].real());
        row.push_back(tr.snapshots[s][c][i].imag());
      }
      csv.row(row);
    }
  }
}

void write_discrete_csv(const fs::path& path, const DiscreteDensity& d) {
  auto out = open_out(path);
  CsvWriter csv(out, {"t", "P0", "P1", "w1"});
  for (std::size_t i = 0; i < d.t.size(); ++i) csv.row({d.t[i], d.P0[i], d.P1[i], d.w1[i]});
}

void write_spectrum_csv(const fs::path& path, const std::vector<SpectrumRow>& rows) {
  auto out = open_out(path);
  CsvWriter csv(out, {"k", "R0_sq", "flip_reflected", "transmitted", "flux_defect"});
  for (const auto& r : rows) csv.row({r.k, r.R0_sq, r.flip_reflected, r.transmitted, r.flux_defect});
}

Json discrete_json(const DiscreteDensity& d) {
  return Json{{"steps", d.t.size()},
              {"final_P1", d.P1.empty() ? 0.0 : d.P1.back()},
              {"max_edge_mass", d.max_edge_mass},
              {"dropped_nodes", d.dropped_nodes}};
}

double max_abs(const std::vector<cdouble>& v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

// dt shrunk so that dt * max|V| stays at `phase` when a phase target is set.
double step_for(const Json& cfg, const std::string& block, double vmax, const std::string& dt_key = "dt") {
  double dt = num(cfg, block + "." + dt_key);
  if (const auto phase = opt_num(cfg, block + ".potential_phase"); phase && vmax > 0.0)
    dt = std::min(dt, *phase / vmax);
  return dt;
}

PropagationOptions propagation_options(const Json& cfg, const std::string& block, double t_start) {
  PropagationOptions o;
  o.t_start = t_start;
  o.t_end = num(cfg, block + ".t_end");
  o.snapshots = count(cfg, block + ".snapshots");
  o.fd_order = at_path(cfg, block + ".fd_order").get<int>();
  o.pade_order = at_path(cfg, block + ".pade_order").get<int>();
  if (!(o.t_end > o.t_start))
    throw ConfigError(block + ".t_end: must exceed the start time " + format_double(t_start));
  return o;
}

Json single_run(const Json& cfg, const fs::path& dir, std::vector<std::string>& warnings, unsigned jobs);

struct SweepOutcome {
  bool ok = false;
  std::string error;
  Json results;
};

Json sweep_run(const Json& cfg, const fs::path& dir, std::vector<std::string>& warnings, unsigned jobs,
               bool& partial_failure) {
  const std::string param = at_path(cfg, "sweep.parameter").get<std::string>();
  const Json values = at_path(cfg, "sweep.values");
  const std::size_t n = values.size();
  std::vector<SweepOutcome> outcomes(n);
  std::vector<std::vector<std::string>> sub_warnings(n);
  std::vector<fs::path> dirs(n);
  for (std::size_t i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03zu", i);
    dirs[i] = dir / "runs" / name;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        Json sub = cfg;
        sub["kind"] = at_path(cfg, "sweep.run");
        sub.merge_patch(at_path(cfg, "sweep.overrides"));
        set_numeric_path(sub, param, values[i].get<double>());
        sub = resolve_config(sub);
        fs::create_directories(dirs[i]);
        const auto t0 = std::chrono::steady_clock::now();
        Json manifest{{"manifest_version", kManifestVersion}, {"tool", "arrival"}, {"version", kToolVersion},
                      {"kind", sub["kind"]}, {"config", sub}};
        outcomes[i].results = single_run(sub, dirs[i], sub_warnings[i], 1);
        manifest["derived"] = outcomes[i].results["derived"];
        manifest["results"] = outcomes[i].results;
        manifest["results"].erase("derived");
        manifest["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest["warnings"] = sub_warnings[i];
        write_json(dirs[i] / "manifest.json", manifest);
        outcomes[i].ok = true;
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const double nan = std::nan("");
  auto out = open_out(dir / "summary.csv");
  CsvWriter csv(out, {"index", "value", "ok", "detected", "reflected", "transmitted_undetected",
                      "mean_arrival", "std_arrival"});
  Json runs = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = outcomes[i];
    double detected = nan, reflected = nan, transmitted = nan, mean = nan, stddev = nan;
    if (o.ok) {
      const Json* stats = nullptr;
      if (o.results.contains("continuum")) {
        const Json& c = o.results["continuum"];
        detected = c["split"]["detected"].get<double>();
        reflected = c["split"]["reflected"].get<double>();
        transmitted = c["split"]["transmitted_undetected"].get<double>();
        stats = &c["stats"];
      } else if (o.results.contains("discrete")) {
        detected = o.results["discrete"]["final_P1"].get<double>();
        stats = &o.results["discrete"]["stats"];
      } else if (o.results.contains("fluorescence")) {
        detected = 1.0 - o.results["fluorescence"]["two_channel"]["final_P0"].get<double>();
        stats = &o.results["fluorescence"]["stats"];
      }
      if (stats) {
        if (!(*stats)["mean"].is_null()) mean = (*stats)["mean"].get<double>();
        if (!(*stats)["stddev"].is_null()) stddev = (*stats)["stddev"].get<double>();
      }
      append(warnings, sub_warnings[i], dirs[i].filename().string());
    } else {
      partial_failure = true;
      warnings.push_back(dirs[i].filename().string() + " failed: " + o.error);
    }
    csv.row({static_cast<double>(i), values[i].get<double>(), o.ok ? 1.0 : 0.0, detected, reflected,
             transmitted, mean, stddev});
    runs.push_back(Json{{"index", i},
                        {"value", values[i]},
                        {"directory", fs::relative(dirs[i], dir).generic_string()},
                        {"ok", o.ok},
                        {"error", o.ok ? Json(nullptr) : Json(o.error)}});
  }
  return Json{{"parameter", param}, {"runs", runs}};
}

Json single_run(const Json& cfg, const fs::path& dir, std::vector<std::string>& warnings, unsigned jobs) {
  const std::string kind = cfg["kind"].get<std::string>();
  const bool fields_out = cfg["output"]["field_snapshots"].get<bool>();
  const DerivedQuantities derived = derive_quantities(cfg);
  append(warnings, derived.warnings, "rates");
  Json results{{"derived", derived.to_json()}};

  if (kind == "rates") {
    auto out = open_out(dir / "rates.csv");
    CsvWriter csv(out, {"A", "delta_shift", "A_closed_form", "delta_shift_closed_form", "correlation_time",
                        "recurrence_time", "k0"});
    csv.row({derived.A_bath, derived.shift_bath, derived.A_closed_form, derived.shift_closed_form,
             derived.correlation_time, derived.recurrence_time, derived.k0});
    return results;
  }

  std::future<ContinuumRun> continuum;
  std::future<std::pair<DiscreteDensity, std::vector<SpectrumRow>>> discrete;
  const bool want_cont = kind == "continuum" || kind == "compare";
  const bool want_disc = kind == "discrete" || kind == "compare";
  const auto policy = jobs > 1 ? std::launch::async : std::launch::deferred;
  if (want_cont) continuum = std::async(policy, [&] { return run_continuum_case(cfg, derived); });
  if (want_disc)
    discrete = std::async(policy, [&] { return std::make_pair(run_discrete_case(cfg), discrete_spectrum(cfg)); });

  std::optional<ContinuumRun> cont;
  std::optional<DiscreteDensity> disc;
  if (want_cont) {
    cont = continuum.get();
    const std::size_t stride = count(cfg, "continuum.csv_stride");
    write_trajectory_csv(dir / "w1_cont.csv", cont->trajectory, stride, false);
    if (fields_out) write_snapshots(dir / "snapshots_cont", cont->trajectory);
    {
      auto out = open_out(dir / "mass_split.csv");
      CsvWriter csv(out, {"detected", "reflected", "transmitted_undetected", "inside", "residual"});
      const MassSplit& m = cont->split;
      csv.row({m.detected, m.reflected, m.transmitted_undetected, m.inside, m.residual});
    }
    Json r = trajectory_json(cont->trajectory);
    r["t_start"] = cont->t_start;
    r["stats"] = stats_json(cont->stats);
    r["split"] = split_json(cont->split);
    results["continuum"] = r;
    append(warnings, cont->trajectory.warnings, "continuum");
  }
  if (want_disc) {
    auto [density, spectrum] = discrete.get();
    write_discrete_csv(dir / "w1_disc.csv", density);
    write_spectrum_csv(dir / "spectrum.csv", spectrum);
    Json r = discrete_json(density);
    // Probability flows back from the bath ahead of the recurrence, so the statistics use
    // the comparison window fraction of t_rec and are omitted if w1 still turns negative.
    TimeWindow stats_window{density.t.front(), density.t.back()};
    const double stats_end = num(cfg, "compare.window_fraction") * density.recurrence_time;
    if (stats_end > stats_window.lo) stats_window.hi = std::min(stats_window.hi, stats_end);
    try {
      r["stats"] = stats_json(arrival_stats(density.t, density.w1, stats_window));
    } catch (const DomainError& e) {
      r["stats"] = Json{{"total", nullptr}, {"mean", nullptr}, {"stddev", nullptr}, {"mode", nullptr},
                        {"window", {stats_window.lo, stats_window.hi}}, {"clipped", nullptr}};
      warnings.push_back(std::string("discrete: arrival statistics omitted: ") + e.what());
    }
    double worst = 0.0;
    for (const auto& row : spectrum) worst = std::max(worst, row.flux_defect);
    r["max_flux_defect"] = worst;
    results["discrete"] = r;
    append(warnings, density.warnings, "discrete");
    disc = std::move(density);
  }
  if (kind == "compare") {
    const TimeWindow window = comparison_window(cfg, derived.recurrence_time);
    const CurveComparison cmp = compare_curves(disc->t, disc->w1, cont->trajectory.t, cont->trajectory.w1, window);
    Json doc = comparison_json(cmp);
    doc["discrete"] = "w1_disc.csv";
    doc["continuum"] = "w1_cont.csv";
    write_json(dir / "comparison.json", doc);
    results["comparison"] = comparison_json(cmp);
  }
  if (kind == "fluorescence") {
    const FluorescenceRun fl = run_fluorescence_case(cfg);
    write_trajectory_csv(dir / "w1_fl.csv", fl.two_channel, 1, true);
    write_trajectory_csv(dir / "w1_one_channel.csv", fl.one_channel, 1, false);
    if (fields_out) {
      write_snapshots(dir / "snapshots_fl", fl.two_channel);
      write_snapshots(dir / "snapshots_one_channel", fl.one_channel);
    }
    Json doc = comparison_json(fl.comparison);
    doc["normalization"] = "each w1 divided by its own integral";
    doc["condition_ratio"] = fl.condition_ratio;
    doc["limit_real_part"] = fl.limit_real_part;
    write_json(dir / "comparison.json", doc);
    results["fluorescence"] = Json{{"two_channel", trajectory_json(fl.two_channel)},
                                   {"one_channel", trajectory_json(fl.one_channel)},
                                   {"t_start", fl.t_start},
                                   {"stats", stats_json(arrival_stats(fl.two_channel.t, fl.two_channel.w1))},
                                   {"comparison", doc}};
    if (fl.condition_ratio < 20.0)
      warnings.push_back("fluorescence: condition ratio " + format_double(fl.condition_ratio) +
                         " is below 20; the one-channel limit is not expected to hold");
    append(warnings, fl.two_channel.warnings, "fluorescence");
    append(warnings, fl.one_channel.warnings, "one-channel");
  }
  return results;
}

}  // namespace

Json DerivedQuantities::to_json() const {
  return Json{{"A", A},
              {"delta_shift", shift},
              {"A_bath", A_bath},
              {"delta_shift_bath", shift_bath},
              {"A_closed_form", A_closed_form},
              {"delta_shift_closed_form", shift_closed_form},
              {"correlation_time", correlation_time},
              {"recurrence_time", recurrence_time},
              {"k0", k0}};
}

DerivedQuantities derive_quantities(const Json& cfg) {
  DerivedQuantities d;
  const ExampleBathParams params = bath_params(cfg);
  const BathSpectrum bath = BathSpectrum::example(params);
  const double omega0 = num(cfg, "detector.omega0");
  const DecayRates rates = decay_rate_and_shift(bath, omega0);
  const RatePair closed = closed_form_rates(params, omega0);
  d.A_bath = rates.A;
  d.shift_bath = rates.shift;
  d.A_closed_form = closed.A;
  d.shift_closed_form = closed.shift;
  d.warnings = rates.warnings;
  d.A = opt_num(cfg, "rates.A").value_or(rates.A);
  d.shift = opt_num(cfg, "rates.shift").value_or(rates.shift);
  d.correlation_time = params.G > 0.0 ? correlation_time(bath, omega0) : 0.0;
  d.recurrence_time = bath.recurrence_time();
  d.k0 = packet_from_config(cfg).central_wavenumber();
  return d;
}

ContinuumRun run_continuum_case(const Json& cfg, const DerivedQuantities& derived) {
  const GaussianPacketSpec spec = packet_from_config(cfg);
  const Sensitivity1D chi = sensitivity_from_config(at_path(cfg, "detector.sensitivity"));
  const Grid1D grid = grid_from(cfg, "continuum", derived.k0);
  const bool include_shift = at_path(cfg, "rates.include_shift").get<bool>();

  ContinuumRun out;
  out.t_start = opt_num(cfg, "continuum.t_start")
                    .value_or(start_time_for_overlap(spec, chi.region_start(), num(cfg, "continuum.start_overlap")));
  const ComplexPotential V = build_conditional_potential(derived.A, derived.shift, chi, grid, include_shift);
  PropagationOptions o = propagation_options(cfg, "continuum", out.t_start);
  o.dt = step_for(cfg, "continuum", max_abs(V.V_over_hbar));
  o.kinetic_safety = num(cfg, "continuum.kinetic_safety");
  o.carrier_wavenumber = opt_num(cfg, "continuum.carrier");
  o.correlation_time = derived.correlation_time;
  try {
    out.trajectory = propagate_conditional(free_evolved_packet(spec, out.t_start, grid), V, spec.mass, o, chi);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("continuum.") + e.what());
  }
  out.stats = arrival_stats(out.trajectory.t, out.trajectory.w1);
  out.split = *out.trajectory.final_split;
  return out;
}

DiscreteDensity run_discrete_case(const Json& cfg) {
  const GaussianPacketSpec spec = packet_from_config(cfg);
  const DetectorGeometry geometry = DetectorGeometry::single_spin(
      num(cfg, "detector.omega0"), sensitivity_from_config(at_path(cfg, "detector.sensitivity")));
  const DiscreteModel model = DiscreteModel::build(geometry, BathSpectrum::example(bath_params(cfg)), spec.mass);
  const Grid1D grid = grid_from(cfg, "discrete", spec.central_wavenumber());

  const double t0 = num(cfg, "discrete.t_start");
  const double t1 = num(cfg, "discrete.t_end");
  const double h = num(cfg, "discrete.t_step");
  const double steps = std::round((t1 - t0) / h);
  if (std::abs(steps * h - (t1 - t0)) > 1e-9 * (t1 - t0))
    throw ConfigError("discrete.t_step: must divide t_end - t_start");
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = t0 + h * static_cast<double>(i);

  DiscreteOptions o;
  o.k_nodes = count(cfg, "discrete.k_nodes");
  o.window_sigmas = num(cfg, "discrete.window_sigmas");
  o.chunk = count(cfg, "discrete.chunk");
  return detection_density_discrete(spec, model, t, grid, o);
}

std::vector<SpectrumRow> discrete_spectrum(const Json& cfg) {
  const GaussianPacketSpec spec = packet_from_config(cfg);
  const DetectorGeometry geometry = DetectorGeometry::single_spin(
      num(cfg, "detector.omega0"), sensitivity_from_config(at_path(cfg, "detector.sensitivity")));
  const DiscreteModel model = DiscreteModel::build(geometry, BathSpectrum::example(bath_params(cfg)), spec.mass);
  const InteriorEigenbasis basis = interior_eigenmodes(model);
  const MomentumSamples samples =
      momentum_samples(spec, count(cfg, "discrete.k_nodes"), num(cfg, "discrete.window_sigmas"));
  std::vector<SpectrumRow> rows;
  rows.reserve(samples.size());
  for (double k : samples.k) {
    const ScatteringSolution s = match_at_origin(model, basis, k);
    SpectrumRow r;
    r.k = k;
    r.R0_sq = std::norm(s.R0);
    for (std::size_t l = 0; l < s.R.size(); ++l)
      if (s.k_channel[l].imag() == 0.0) r.flip_reflected += s.k_channel[l].real() * std::norm(s.R[l]) / k;
    for (std::size_t m = 0; m < s.alpha.size(); ++m)
      if (s.q_mode[m].imag() == 0.0) r.transmitted += s.q_mode[m].real() * std::norm(s.alpha[m]) / k;
    r.flux_defect = s.flux_defect;
    rows.push_back(r);
  }
  return rows;
}

FluorescenceRun run_fluorescence_case(const Json& cfg) {
  const GaussianPacketSpec spec = packet_from_config(cfg);
  const Sensitivity1D region = sensitivity_from_config(at_path(cfg, "fluorescence.region"));
  const Grid1D grid = grid_from(cfg, "fluorescence", spec.central_wavenumber());
  const double rabi = num(cfg, "fluorescence.rabi");
  const double detuning = num(cfg, "fluorescence.detuning");
  const double decay = num(cfg, "fluorescence.decay");

  FluorescenceRun out;
  out.t_start = opt_num(cfg, "fluorescence.t_start")
                    .value_or(start_time_for_overlap(spec, region.region_start(), num(cfg, "continuum.start_overlap")));
  const std::vector<cdouble> psi0 = free_evolved_packet(spec, out.t_start, grid);

  TwoChannelState state;
  state.grid = grid;
  state.ground = psi0;
  state.excited.assign(grid.size(), 0.0);
  state.rabi.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) state.rabi[i] = rabi * region(grid.x(i));
  state.detuning = detuning;
  state.decay = decay;

  PropagationOptions o = propagation_options(cfg, "fluorescence", out.t_start);
  o.dt = step_for(cfg, "fluorescence", 0.5 * rabi + std::abs(cdouble(detuning, 0.5 * decay)));
  try {
    out.two_channel = propagate_two_channel(state, spec.mass, o);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("fluorescence.") + e.what());
  }

  const ComplexPotential V = one_channel_limit_potential(state.rabi, detuning, decay, grid);
  for (const auto& v : V.V_over_hbar) out.limit_real_part = std::max(out.limit_real_part, std::abs(v.real()));
  PropagationOptions o1 = propagation_options(cfg, "fluorescence", out.t_start);
  o1.dt = step_for(cfg, "fluorescence", max_abs(V.V_over_hbar),
                   at_path(cfg, "fluorescence.one_channel_dt").is_null() ? "dt" : "one_channel_dt");
  try {
    out.one_channel = propagate_conditional(psi0, V, spec.mass, o1, region);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("fluorescence.") + e.what());
  }

  auto normalized = [](const ConditionalTrajectory& tr) {
    const double total = arrival_stats(tr.t, tr.w1).total;
    if (!(total > 0.0)) throw NumericalError("fluorescence: w1 has zero integral, nothing to normalize");
    std::vector<double> w(tr.w1);
    for (auto& v : w) v /= total;
    return w;
  };
  out.comparison = compare_curves(out.two_channel.t, normalized(out.two_channel), out.one_channel.t,
                                  normalized(out.one_channel));

  const double k_top = spec.central_wavenumber() + 4.0 * spec.wavenumber_width();
  const double kinetic = kHbar * k_top * k_top / (2.0 * spec.mass);
  out.condition_ratio = 0.5 * std::abs(cdouble(2.0 * detuning, decay)) / std::max(0.5 * rabi, kinetic);
  return out;
}

TimeWindow comparison_window(const Json& cfg, double recurrence_time) {
  const Json& w = at_path(cfg, "compare.window");
  if (!w.is_null()) return {w[0].get<double>(), w[1].get<double>()};
  return {0.0, num(cfg, "compare.window_fraction") * recurrence_time};
}

RunReport run(const Json& config, const RunOptions& options) {
  RunReport report;
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(options.out);
  const unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> warnings;

  Json& m = report.manifest;
  m["manifest_version"] = kManifestVersion;
  m["tool"] = "arrival";
  m["version"] = kToolVersion;
  m["kind"] = config["kind"];
  m["config"] = config;
  try {
    Json results;
    if (config["kind"] == "sweep") {
      bool partial = false;
      m["derived"] = derive_quantities(config).to_json();
      results = sweep_run(config, options.out, warnings, jobs, partial);
      if (partial) report.exit_code = kExitPartialFailure;
    } else {
      results = single_run(config, options.out, warnings, jobs);
      m["derived"] = results["derived"];
      results.erase("derived");
    }
    m["results"] = results;
  } catch (const ConfigError& e) {
    m["error"] = e.what();
    report.exit_code = kExitConfigError;
  } catch (const std::exception& e) {
    m["error"] = e.what();
    report.exit_code = kExitRuntimeError;
  }
  m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m["warnings"] = warnings;
  write_json(options.out / "manifest.json", m);
  return report;
}

}  // namespace arrival
