#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace postbc {

/// Raised on config-schema violations; the CLI maps it to exit code 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

nlohmann::json load_config_file(const std::string& path);

/// Applies "a.b.c=value" onto the config; value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// One allowed config field: dotted key plus expected JSON type, one of
/// "number", "integer", "string", "boolean", "array".
struct ConfigField {
  std::string key;
  std::string type;
};

/// Field-level validation: every present key must be declared with a
/// matching type; unknown keys are rejected.
void validate_config(const nlohmann::json& config, const std::vector<ConfigField>& schema);

/// Output root: the POSTBC_OUT_ROOT environment variable, else "runs".
std::string default_out_root();

/// Creates <out_root>/<name> (deterministic path, reruns overwrite) and
/// writes metadata.json with the resolved config.
std::string make_run_dir(const std::string& out_root, const std::string& name,
                         const nlohmann::json& resolved_config);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace postbc
