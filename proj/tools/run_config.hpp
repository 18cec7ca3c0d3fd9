#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace dkrg::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every key a config file may set.
const std::set<std::string>& known_config_keys();

/// Parsed `key = value` lines. Blank lines and `#` comments are ignored;
/// unknown keys, duplicates and lines without `=` raise UsageError naming
/// the offending line.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dkrg::cli
