#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gstds {

// Flat key=value store; file sections become "section.key" prefixes.
class ConfigMap {
 public:
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Parses `[section]` headers and `key = value` lines; '#' starts a comment.
ConfigMap parse_config_file(const std::filesystem::path& path);

}  // namespace gstds
