#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arrival/config.hpp"
#include "arrival/errors.hpp"
#include "arrival/runner.hpp"

int main(int argc, char** argv) {
  using namespace arrival;

  CLI::App app{"Arrival-time detection models: discrete spin-boson scattering and complex-potential propagation"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string preset_name;
  std::string out_dir = "out";
  unsigned jobs = 0;
  bool no_shift = false;
  long long snapshots = -1;

  auto* config_opt = app.add_option("--config", config_path, "Config file (JSON) or a run manifest");
  auto* preset_opt = app.add_option("--preset", preset_name, "Bundled preset (figure1)");
  config_opt->excludes(preset_opt);
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads for sweeps (0 = logical cores)")->capture_default_str();
  app.add_flag("--no-shift", no_shift, "Drop the level shift from the conditional potential");
  app.add_option("--snapshots", snapshots, "Stored field snapshots; also writes them as CSV")
      ->check(CLI::NonNegativeNumber);

  for (const char* kind : {"discrete", "continuum", "compare", "rates", "fluorescence", "sweep"})
    app.add_subcommand(kind, std::string("Run kind \"") + kind + "\"")->fallthrough();
  app.add_subcommand("validate", "Check a config and print it with defaults filled in")->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (config_path.empty() && preset_name.empty()) throw ConfigError("one of --config or --preset is required");
    Json user = config_path.empty() ? preset(preset_name) : load_config_file(config_path);
    if (!user.is_object()) throw ConfigError("<root>: expected an object");
    if (command != "validate") user["kind"] = command;
    if (no_shift) user["rates"]["include_shift"] = false;
    if (snapshots >= 0) {
      user["continuum"]["snapshots"] = snapshots;
      user["fluorescence"]["snapshots"] = snapshots;
      user["output"]["field_snapshots"] = true;
    }
    const Json resolved = resolve_config(user);
    if (command == "validate") {
      std::cout << resolved.dump(2) << '\n';
      return kExitOk;
    }

    RunOptions options;
    options.out = out_dir;
    options.jobs = jobs;
    const RunReport report = run(resolved, options);
    for (const auto& w : report.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    if (report.manifest.contains("error"))
      std::cerr << "error: " << report.manifest["error"].get<std::string>() << '\n';
    std::cout << "wrote " << (options.out / "manifest.json").string() << '\n';
    return report.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}
