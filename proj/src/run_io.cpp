#include "postbc/run_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace postbc {

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object: " + path);
  return j;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key.path=value: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string value_str = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(value_str);
  } catch (const nlohmann::json::parse_error&) {
    value = value_str;  // bare string
  }
  nlohmann::json* node = &config;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("empty key segment in override: " + assignment);
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("empty key in override: " + assignment);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
  (*node)[parts.back()] = value;
}

namespace {

bool type_matches(const nlohmann::json& v, const std::string& type) {
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "array") return v.is_array();
  return false;
}

void collect_keys(const nlohmann::json& node, const std::string& prefix,
                  std::vector<std::pair<std::string, const nlohmann::json*>>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      collect_keys(*it, key, out);
    else
      out.emplace_back(key, &(*it));
  }
}

}  // namespace

void validate_config(const nlohmann::json& config, const std::vector<ConfigField>& schema) {
  std::vector<std::pair<std::string, const nlohmann::json*>> keys;
  collect_keys(config, "", keys);
  for (const auto& [key, value] : keys) {
    const ConfigField* field = nullptr;
    for (const auto& f : schema)
      if (f.key == key) {
        field = &f;
        break;
      }
    if (field == nullptr) throw ConfigError("unknown config field: " + key);
    if (!type_matches(*value, field->type))
      throw ConfigError("config field " + key + " must have type " + field->type);
  }
}

std::string default_out_root() {
  const char* env = std::getenv("POSTBC_OUT_ROOT");
  return env != nullptr && env[0] != '\0' ? std::string(env) : std::string("runs");
}

std::string make_run_dir(const std::string& out_root, const std::string& name,
                         const nlohmann::json& resolved_config) {
  std::filesystem::path dir = std::filesystem::path(out_root) / name;
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["config"] = resolved_config;
  meta["version"] = "0.1.0";
  meta["subcommand"] = name.substr(0, name.find('-'));
  write_text_file((dir / "metadata.json").string(), meta.dump(2) + "\n");
  return dir.string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace postbc
