#pragma once

#include <map>
#include <string>

namespace ostr {

// Flat key=value configuration with dotted section prefixes (loss.gamma=5).
// Precedence: built-in defaults, then a config file, then command-line
// overrides. Every artifact the tool writes embeds the resolved text so runs
// can be traced back to their settings.
class RunConfig {
 public:
  static RunConfig defaults();
  static RunConfig parse(const std::string& text);

  void load_file(const std::string& path);
  void merge_line(const std::string& line);  // "key=value", '#' comments skipped

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  const std::string& get_str(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::string serialize() const;  // sorted key=value lines

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace ostr
