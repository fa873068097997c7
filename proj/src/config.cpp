#include "plcr/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "plcr/checksum.hpp"

namespace plcr {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not key=value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw std::invalid_argument("config: empty key");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_str(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

int Config::get_int(const std::string& key, int def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stoi(it->second);
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stod(it->second);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stoull(it->second);
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  return it->second == "1" || it->second == "true" || it->second == "yes";
}

std::string Config::fingerprint() const {
  Fnv1a h;
  for (const auto& [k, v] : values_) {
    h.update(k);
    h.update("=");
    h.update(v);
    h.update("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h.digest()));
  return buf;
}

std::string Config::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace plcr
