#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace fragq {

// Command-scoped configuration, merged as defaults <- config file <- flags.
// Only keys present in the defaults are accepted, and a value must keep the
// JSON type of its default (integers may stand in for reals).
class RunConfig {
 public:
  RunConfig(std::string command, nlohmann::json defaults);

  // The file is a JSON object, either flat or with one section per command
  // ({"train": {...}, "eval": {...}}); only this command's section is used then.
  void merge_file(const std::filesystem::path& path);
  void merge(const nlohmann::json& values, const std::string& origin);

  const nlohmann::json& effective() const { return values_; }
  const std::string& command() const { return command_; }
  // 16 hex digits of FNV-1a over the canonical dump of {command, config}.
  std::string hash() const;
  // {"command", "config", "config_hash"} for embedding into artifacts.
  nlohmann::json record() const;

  template <typename T>
  T get(const std::string& key) const {
    return values_.at(key).get<T>();
  }

 private:
  std::string command_;
  nlohmann::json values_;
};

}  // namespace fragq
