#include "builderbench/config.h"

#include <fstream>
#include <sstream>

#include "builderbench/common.h"
#include "builderbench/thread_pool.h"

namespace builderbench {
namespace {

std::string Trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), path);
}

RunConfig RunConfig::Parse(const std::string& text, const std::string& source) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    c.values_[key] = Trim(line.substr(eq + 1));
  }
  return c;
}

std::optional<std::string> RunConfig::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

int RunConfig::GetInt(const std::string& key, int fallback) const {
  const auto v = Get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const int x = std::stoi(*v, &used);
    if (used == v->size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an integer, got '" + *v + "'");
}

double RunConfig::GetDouble(const std::string& key, double fallback) const {
  const auto v = Get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double x = std::stod(*v, &used);
    if (used == v->size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + *v + "'");
}

std::string RunConfig::GetString(const std::string& key, const std::string& fallback) const {
  return Get(key).value_or(fallback);
}

int ResolveThreads(std::optional<int> flag, const RunConfig& config) {
  if (flag) {
    if (*flag < 1) throw ConfigError("--threads must be >= 1");
    return *flag;
  }
  if (config.Has("threads")) {
    const int t = config.GetInt("threads", 1);
    if (t < 1) throw ConfigError("config key 'threads' must be >= 1");
    return t;
  }
  return DefaultThreadCount();
}

}  // namespace builderbench
