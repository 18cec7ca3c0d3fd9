#include "run_config.hpp"

#include <fstream>
#include <sstream>

namespace dkrg::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "batch_size",   "checkpoint",    "checkpoint_every", "clip_norm",  "data",
      "dropout",      "feature_depth", "hr_dir",           "iterations", "learning_rate",
      "log",          "max_lag",       "method",           "out",        "out_csv",
      "patch",        "radius",        "residual_units",   "scale",      "scales",
      "seed",         "stride",        "threads",          "window",     "window_stride",
  };
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(number);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (known_config_keys().count(key) == 0) {
      throw UsageError(where + ": unknown key '" + key + "'");
    }
    if (value.empty()) throw UsageError(where + ": empty value for '" + key + "'");
    if (!cfg.values_.emplace(key, value).second) {
      throw UsageError(where + ": duplicate key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("config key '" + key + "' not set");
  return it->second;
}

}  // namespace dkrg::cli
