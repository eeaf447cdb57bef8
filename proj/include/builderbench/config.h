#ifndef BUILDERBENCH_CONFIG_H_
#define BUILDERBENCH_CONFIG_H_

#include <map>
#include <optional>
#include <string>

namespace builderbench {

// key=value run configuration. '#' starts a comment; blank lines are
// skipped; keys use the same spelling as the CLI flags.
class RunConfig {
 public:
  static RunConfig Load(const std::string& path);  // throws ConfigError
  static RunConfig Parse(const std::string& text, const std::string& source = "<string>");

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> Get(const std::string& key) const;
  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Typed reads; throw ConfigError naming the key on malformed values.
  int GetInt(const std::string& key, int fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  std::string GetString(const std::string& key, const std::string& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

// Thread count: the flag when given, then the config key "threads", then
// BB_THREADS, then hardware concurrency.
int ResolveThreads(std::optional<int> flag, const RunConfig& config);

}  // namespace builderbench

#endif  // BUILDERBENCH_CONFIG_H_
