#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arrival/geometry.hpp"
#include "arrival/packet.hpp"

namespace arrival {

using Json = nlohmann::ordered_json;

// Run kinds accepted in the "kind" field.
inline const std::vector<std::string> kRunKinds{"discrete", "continuum", "compare", "rates", "fluorescence", "sweep"};

// Defaults merged under a user config; every accepted key appears here.
const Json& config_defaults();

// Bundled presets ("figure1").
Json preset(const std::string& name);

// Reads a config file or a run manifest (uses its "config" block).
Json load_config_file(const std::string& path);

// Merges defaults, rejects unknown keys and type mismatches, checks physical
// ranges. Throws ConfigError with the dotted field path in the message.
Json resolve_config(const Json& user);

// Value at a dotted path such as "bath.G"; throws ConfigError when absent.
const Json& at_path(const Json& config, const std::string& path);
// Sets a numeric leaf; throws ConfigError if the path is not a numeric field.
void set_numeric_path(Json& config, const std::string& path, double value);

GaussianPacketSpec packet_from_config(const Json& config);
Sensitivity1D sensitivity_from_config(const Json& block);

}  // namespace arrival
