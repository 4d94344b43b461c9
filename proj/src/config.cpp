#include "arrival/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "arrival/errors.hpp"
#include "arrival/preset_data.hpp"

namespace arrival {
namespace {

enum class FieldType { Number, OptionalNumber, Integer, Bool, String, NumberList, OptionalWindow, Object };

struct Field {
  std::string path;
  FieldType type;
  Json fallback;   // null marks a required field unless the type is optional
};

const std::vector<Field>& fields() {
  using F = FieldType;
  static const std::vector<Field> list{
      {"kind", F::String, "compare"},

      {"particle.mass", F::Number, nullptr},
      {"particle.mean_velocity", F::Number, nullptr},
      {"particle.momentum_width", F::Number, nullptr},
      {"particle.focal_position", F::Number, 0.0},
      {"particle.focal_time", F::Number, 0.0},

      {"detector.omega0", F::Number, nullptr},
      {"detector.sensitivity.type", F::String, "half_line"},
      {"detector.sensitivity.start", F::Number, 0.0},
      {"detector.sensitivity.lo", F::Number, 0.0},
      {"detector.sensitivity.hi", F::Number, 0.0},

      {"bath.G", F::Number, nullptr},
      {"bath.omega_max", F::Number, nullptr},
      {"bath.modes", F::Integer, nullptr},
      {"bath.c0", F::Number, 1.0},

      {"rates.A", F::OptionalNumber, nullptr},
      {"rates.shift", F::OptionalNumber, nullptr},
      {"rates.include_shift", F::Bool, true},

      {"continuum.x_min", F::OptionalNumber, nullptr},
      {"continuum.x_max", F::OptionalNumber, nullptr},
      {"continuum.spacing", F::OptionalNumber, nullptr},
      {"continuum.dt", F::OptionalNumber, nullptr},
      {"continuum.potential_phase", F::OptionalNumber, nullptr},
      {"continuum.t_start", F::OptionalNumber, nullptr},
      {"continuum.t_end", F::OptionalNumber, nullptr},
      {"continuum.start_overlap", F::Number, 1e-10},
      {"continuum.fd_order", F::Integer, 6},
      {"continuum.pade_order", F::Integer, 3},
      {"continuum.snapshots", F::Integer, 512},
      {"continuum.kinetic_safety", F::Number, 1.0},
      {"continuum.carrier", F::OptionalNumber, nullptr},
      {"continuum.csv_stride", F::Integer, 1},

      {"discrete.x_min", F::OptionalNumber, nullptr},
      {"discrete.x_max", F::OptionalNumber, nullptr},
      {"discrete.spacing", F::OptionalNumber, nullptr},
      {"discrete.t_start", F::OptionalNumber, nullptr},
      {"discrete.t_end", F::OptionalNumber, nullptr},
      {"discrete.t_step", F::OptionalNumber, nullptr},
      {"discrete.k_nodes", F::Integer, 2001},
      {"discrete.window_sigmas", F::Number, 8.0},
      {"discrete.chunk", F::Integer, 512},

      {"compare.window_fraction", F::Number, 0.8},
      {"compare.window", F::OptionalWindow, nullptr},

      {"fluorescence.rabi", F::OptionalNumber, nullptr},
      {"fluorescence.detuning", F::Number, 0.0},
      {"fluorescence.decay", F::OptionalNumber, nullptr},
      {"fluorescence.region.type", F::String, "half_line"},
      {"fluorescence.region.start", F::Number, 0.0},
      {"fluorescence.region.lo", F::Number, 0.0},
      {"fluorescence.region.hi", F::Number, 0.0},
      {"fluorescence.x_min", F::OptionalNumber, nullptr},
      {"fluorescence.x_max", F::OptionalNumber, nullptr},
      {"fluorescence.spacing", F::OptionalNumber, nullptr},
      {"fluorescence.dt", F::OptionalNumber, nullptr},
      {"fluorescence.one_channel_dt", F::OptionalNumber, nullptr},
      {"fluorescence.potential_phase", F::OptionalNumber, nullptr},
      {"fluorescence.t_start", F::OptionalNumber, nullptr},
      {"fluorescence.t_end", F::OptionalNumber, nullptr},
      {"fluorescence.fd_order", F::Integer, 6},
      {"fluorescence.pade_order", F::Integer, 3},
      {"fluorescence.snapshots", F::Integer, 64},

      {"sweep.run", F::String, "continuum"},
      {"sweep.parameter", F::String, ""},
      {"sweep.values", F::NumberList, Json::array()},
      {"sweep.overrides", F::Object, Json::object()},

      {"output.field_snapshots", F::Bool, false},
  };
  return list;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '.')) parts.push_back(item);
  return parts;
}

const Field* find_field(const std::string& path) {
  for (const auto& f : fields())
    if (f.path == path) return &f;
  return nullptr;
}

bool is_prefix_of_field(const std::string& path) {
  const std::string p = path + ".";
  return std::any_of(fields().begin(), fields().end(),
                     [&](const Field& f) { return f.path.compare(0, p.size(), p) == 0; });
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_type(const Field& f, const Json& v) {
  using F = FieldType;
  const bool null_ok = f.type == F::OptionalNumber || f.type == F::OptionalWindow;
  if (v.is_null()) {
    if (!null_ok) fail(f.path, "must not be null");
    return;
  }
  switch (f.type) {
    case F::Number:
    case F::OptionalNumber:
      if (!v.is_number()) fail(f.path, "expected a number");
      if (!std::isfinite(v.get<double>())) fail(f.path, "must be finite");
      break;
    case F::Integer:
      if (!v.is_number_integer()) fail(f.path, "expected an integer");
      break;
    case F::Bool:
      if (!v.is_boolean()) fail(f.path, "expected true or false");
      break;
    case F::String:
      if (!v.is_string()) fail(f.path, "expected a string");
      break;
    case F::NumberList:
      if (!v.is_array()) fail(f.path, "expected an array of numbers");
      for (const auto& e : v)
        if (!e.is_number() || !std::isfinite(e.get<double>())) fail(f.path, "expected finite numbers");
      break;
    case F::OptionalWindow:
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail(f.path, "expected [t_lo, t_hi] or null");
      break;
    case F::Object:
      if (!v.is_object()) fail(f.path, "expected an object");
      break;
  }
}

// Walks the user tree: every leaf must be a declared field of matching type.
void check_keys(const Json& node, const std::string& prefix) {
  if (!node.is_object()) fail(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (const Field* f = find_field(path)) {
      check_type(*f, value);
    } else if (is_prefix_of_field(path)) {
      check_keys(value, path);
    } else {
      fail(path, "unknown key");
    }
  }
}

Json* locate(Json& root, const std::string& path) {
  Json* node = &root;
  for (const auto& part : split_path(path)) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

double number(const Json& cfg, const std::string& path) { return at_path(cfg, path).get<double>(); }

void require(const Json& cfg, const std::string& path) {
  if (at_path(cfg, path).is_null()) fail(path, "required");
}

void positive(const Json& cfg, const std::string& path) {
  require(cfg, path);
  const double v = number(cfg, path);
  if (!(v > 0.0)) fail(path, "must be > 0 (got " + at_path(cfg, path).dump() + ")");
}

void non_negative(const Json& cfg, const std::string& path) {
  require(cfg, path);
  if (!(number(cfg, path) >= 0.0)) fail(path, "must be >= 0 (got " + at_path(cfg, path).dump() + ")");
}

void ordered(const Json& cfg, const std::string& lo, const std::string& hi) {
  require(cfg, lo);
  require(cfg, hi);
  if (!(number(cfg, lo) < number(cfg, hi))) fail(hi, "must exceed " + lo);
}

void check_sensitivity(const Json& cfg, const std::string& block) {
  const std::string type = at_path(cfg, block + ".type").get<std::string>();
  if (type == "interval") {
    ordered(cfg, block + ".lo", block + ".hi");
  } else if (type != "half_line") {
    fail(block + ".type", "must be \"half_line\" or \"interval\"");
  }
}

void check_propagation(const Json& cfg, const std::string& b) {
  ordered(cfg, b + ".x_min", b + ".x_max");
  positive(cfg, b + ".spacing");
  positive(cfg, b + ".dt");
  require(cfg, b + ".t_end");
  if (!at_path(cfg, b + ".t_start").is_null()) ordered(cfg, b + ".t_start", b + ".t_end");
  const auto phase = at_path(cfg, b + ".potential_phase");
  if (!phase.is_null() && !(phase.get<double>() > 0.0 && phase.get<double>() < 0.1))
    fail(b + ".potential_phase", "must lie in (0, 0.1)");
  const int fd = at_path(cfg, b + ".fd_order").get<int>();
  if (fd != 2 && fd != 4 && fd != 6 && fd != 8) fail(b + ".fd_order", "must be 2, 4, 6 or 8");
  const int pade = at_path(cfg, b + ".pade_order").get<int>();
  if (pade < 1 || pade > 8) fail(b + ".pade_order", "must be between 1 and 8");
  if (at_path(cfg, b + ".snapshots").get<long long>() < 0) fail(b + ".snapshots", "must be >= 0");
}

void check_continuum(const Json& cfg) {
  check_propagation(cfg, "continuum");
  positive(cfg, "continuum.start_overlap");
  positive(cfg, "continuum.kinetic_safety");
  if (at_path(cfg, "continuum.csv_stride").get<long long>() < 1) fail("continuum.csv_stride", "must be >= 1");
  if (!at_path(cfg, "rates.A").is_null()) non_negative(cfg, "rates.A");
}

void check_discrete(const Json& cfg) {
  if (at_path(cfg, "detector.sensitivity.type").get<std::string>() != "half_line" ||
      number(cfg, "detector.sensitivity.start") != 0.0)
    fail("detector.sensitivity", "the discrete model needs a half line starting at 0");
  ordered(cfg, "discrete.x_min", "discrete.x_max");
  positive(cfg, "discrete.spacing");
  ordered(cfg, "discrete.t_start", "discrete.t_end");
  positive(cfg, "discrete.t_step");
  if (at_path(cfg, "discrete.k_nodes").get<long long>() < 3) fail("discrete.k_nodes", "must be >= 3");
  if (at_path(cfg, "discrete.chunk").get<long long>() < 1) fail("discrete.chunk", "must be >= 1");
  positive(cfg, "discrete.window_sigmas");
}

void check_fluorescence(const Json& cfg) {
  non_negative(cfg, "fluorescence.rabi");
  non_negative(cfg, "fluorescence.decay");
  if (number(cfg, "fluorescence.decay") == 0.0 && number(cfg, "fluorescence.detuning") == 0.0)
    fail("fluorescence.decay", "decay and detuning cannot both vanish");
  check_sensitivity(cfg, "fluorescence.region");
  check_propagation(cfg, "fluorescence");
  if (!at_path(cfg, "fluorescence.one_channel_dt").is_null()) positive(cfg, "fluorescence.one_channel_dt");
}

void check_kind(const Json& cfg, const std::string& kind, const std::string& kind_path) {
  if (kind == "continuum") {
    check_continuum(cfg);
  } else if (kind == "discrete") {
    check_discrete(cfg);
  } else if (kind == "compare") {
    check_continuum(cfg);
    check_discrete(cfg);
    positive(cfg, "compare.window_fraction");
    const auto& w = at_path(cfg, "compare.window");
    if (!w.is_null() && !(w[0].get<double>() < w[1].get<double>()))
      fail("compare.window", "needs t_lo < t_hi");
  } else if (kind == "fluorescence") {
    check_fluorescence(cfg);
  } else if (kind != "rates") {
    fail(kind_path, "unknown run kind \"" + kind + "\"");
  }
}

void check_physics(const Json& cfg) {
  positive(cfg, "particle.mass");
  positive(cfg, "particle.mean_velocity");
  positive(cfg, "particle.momentum_width");
  const double ratio = number(cfg, "particle.mass") * number(cfg, "particle.mean_velocity") /
                       number(cfg, "particle.momentum_width");
  if (!(ratio > 8.0))
    fail("particle.momentum_width", "mass * mean_velocity / momentum_width must exceed 8");
  positive(cfg, "detector.omega0");
  check_sensitivity(cfg, "detector.sensitivity");
  non_negative(cfg, "bath.G");
  positive(cfg, "bath.omega_max");
  positive(cfg, "bath.c0");
  require(cfg, "bath.modes");
  if (at_path(cfg, "bath.modes").get<long long>() < 1) fail("bath.modes", "must be >= 1");
  if (!(number(cfg, "bath.omega_max") > number(cfg, "detector.omega0")))
    fail("bath.omega_max", "must exceed detector.omega0");
}

Json resolve_tree(const Json& user, bool nested);

void check_sweep(const Json& cfg) {
  const std::string run = at_path(cfg, "sweep.run").get<std::string>();
  if (run == "sweep") fail("sweep.run", "nested sweeps are not supported");
  const std::string param = at_path(cfg, "sweep.parameter").get<std::string>();
  const Field* f = find_field(param);
  if (!f || (f->type != FieldType::Number && f->type != FieldType::OptionalNumber &&
             f->type != FieldType::Integer))
    fail("sweep.parameter", "\"" + param + "\" is not a scalar numeric field");
  if (param.rfind("sweep.", 0) == 0) fail("sweep.parameter", "cannot target the sweep block");
  if (at_path(cfg, "sweep.values").empty()) fail("sweep.values", "must not be empty");
  // Each sub-run must be a valid config on its own.
  for (const auto& v : at_path(cfg, "sweep.values")) {
    Json sub = cfg;
    sub["kind"] = run;
    sub.merge_patch(at_path(cfg, "sweep.overrides"));
    set_numeric_path(sub, param, v.get<double>());
    try {
      resolve_tree(sub, true);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (sweep value " + v.dump() + ")");
    }
  }
}

Json resolve_tree(const Json& user, bool nested) {
  check_keys(user, "");
  // Rebuilt in declaration order so that equal configs serialize identically.
  Json cfg = config_defaults();
  Json source = user;
  for (const auto& f : fields())
    if (const Json* v = locate(source, f.path)) *locate(cfg, f.path) = *v;
  check_physics(cfg);
  const std::string kind = cfg["kind"].get<std::string>();
  if (kind == "sweep") {
    if (nested) fail("kind", "nested sweeps are not supported");
    check_sweep(cfg);
  } else {
    check_kind(cfg, kind, "kind");
  }
  return cfg;
}

}  // namespace

const Json& config_defaults() {
  static const Json defaults = [] {
    Json d = Json::object();
    for (const auto& f : fields()) {
      Json* node = &d;
      const auto parts = split_path(f.path);
      for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
      (*node)[parts.back()] = f.fallback;
    }
    return d;
  }();
  return defaults;
}

Json preset(const std::string& name) {
  if (name != "figure1") throw ConfigError("--preset: unknown preset \"" + name + "\"");
  return Json::parse(kFigure1Preset);
}

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot open " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version")) {
    if (!doc.contains("config")) throw ConfigError(path + ": manifest without a config block");
    return doc["config"];
  }
  return doc;
}

Json resolve_config(const Json& user) { return resolve_tree(user, false); }

const Json& at_path(const Json& config, const std::string& path) {
  const Json* node = &config;
  for (const auto& part : split_path(path)) {
    if (!node->is_object() || !node->contains(part)) fail(path, "missing");
    node = &(*node)[part];
  }
  return *node;
}

void set_numeric_path(Json& config, const std::string& path, double value) {
  const Field* f = find_field(path);
  if (!f) fail(path, "unknown field");
  Json* parent = &config;
  const auto parts = split_path(path);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) parent = &(*parent)[parts[i]];
  if (f->type == FieldType::Integer) {
    if (value != std::round(value)) fail(path, "expected an integer");
    (*parent)[parts.back()] = static_cast<long long>(value);
  } else if (f->type == FieldType::Number || f->type == FieldType::OptionalNumber) {
    (*parent)[parts.back()] = value;
  } else {
    fail(path, "not a numeric field");
  }
}

GaussianPacketSpec packet_from_config(const Json& config) {
  GaussianPacketSpec spec;
  spec.mass = number(config, "particle.mass");
  spec.mean_velocity = number(config, "particle.mean_velocity");
  spec.momentum_width = number(config, "particle.momentum_width");
  spec.focal_position = number(config, "particle.focal_position");
  spec.focal_time = number(config, "particle.focal_time");
  spec.validate();
  return spec;
}

Sensitivity1D sensitivity_from_config(const Json& block) {
  const std::string type = block.at("type").get<std::string>();
  if (type == "interval") return Sensitivity1D::interval(block.at("lo").get<double>(), block.at("hi").get<double>());
  return Sensitivity1D::half_line(block.at("start").get<double>());
}

}  // namespace arrival
