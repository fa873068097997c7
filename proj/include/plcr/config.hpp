#pragma once

#include <map>
#include <string>

namespace plcr {

// Flat key=value configuration with dotted section prefixes, e.g.
// `train.learning_rate = 0.0001`. Overrides win over file values. The
// fingerprint is a digest of the normalized key=value pairs and is embedded
// in every artifact a run produces.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

  std::string fingerprint() const;
  std::string to_string() const;  // lossless round-trip form

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace plcr
