#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "growthgr/common.hpp"

namespace growthgr {

// Flat key=value configuration. '#' starts a comment; whitespace around keys
// and values is trimmed. Precedence: CLI override > file > default.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    GGR_CHECK(in.good(), config_error("cannot open config file: " + path));
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      GGR_CHECK(eq != std::string::npos,
                config_error("config line " + std::to_string(lineno) + " is not key=value"));
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      GGR_CHECK(!key.empty(), config_error("empty key on config line " + std::to_string(lineno)));
      c.kv_[key] = val;
    }
    return c;
  }

  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  // CLI overrides in key=value form.
  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
      auto eq = o.find('=');
      GGR_CHECK(eq != std::string::npos, config_error("override is not key=value: " + o));
      kv_[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  int64_t get_int(const std::string& key, int64_t dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    int64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    GGR_CHECK(ec == std::errc() && p == it->second.data() + it->second.size(),
              config_error("config key '" + key + "' is not an integer: " + it->second));
    return v;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      GGR_CHECK(pos == it->second.size(),
                config_error("config key '" + key + "' is not a number: " + it->second));
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "' is not a number: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw config_error("config key '" + key + "' is not a boolean: " + s);
  }

  // Deterministic snapshot (sorted keys) used for manifests.
  std::string snapshot() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
    return out.str();
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace growthgr
