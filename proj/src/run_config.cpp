#include "fragq/run_config.hpp"

#include <cstdio>
#include <fstream>

#include "fragq/errors.hpp"
#include "fragq/rng.hpp"

namespace fragq {

using nlohmann::json;

namespace {

bool compatible(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  return def.type() == v.type();
}

}  // namespace

RunConfig::RunConfig(std::string command, json defaults) : command_(std::move(command)), values_(std::move(defaults)) {
  if (!values_.is_object()) throw ContractError("run config defaults must be an object");
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
  if (j.contains(command_) && j[command_].is_object() && !values_.contains(command_)) j = j[command_];
  merge(j, path.string());
}

void RunConfig::merge(const json& values, const std::string& origin) {
  for (const auto& [key, v] : values.items()) {
    if (!values_.contains(key)) throw ConfigError("unknown key '" + key + "' for " + command_ + " in " + origin);
    json& slot = values_[key];
    if (!compatible(slot, v))
      throw ConfigError("key '" + key + "' in " + origin + " must be of type " + slot.type_name() + ", got " +
                        v.type_name());
    slot = slot.is_number_float() ? json(v.get<double>()) : v;
  }
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(json{{"command", command_}, {"config", values_}}.dump())));
  return buf;
}

json RunConfig::record() const { return {{"command", command_}, {"config", values_}, {"config_hash", hash()}}; }

}  // namespace fragq
