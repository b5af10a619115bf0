#pragma once

// Flat `key = value` configuration files. Lines starting with '#' are
// comments; inline comments after a value are also stripped. Keys are unique.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "torsim/errors.hpp"

namespace torsim {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>") {
    KeyValueConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("", std::string(origin) + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
      }
      std::string key = trim(stripped.substr(0, eq));
      std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("", std::string(origin) + ":" + std::to_string(lineno) + ": empty key");
      }
      if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key");
      cfg.values_.emplace(std::move(key), std::move(value));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> raw(const std::string& key) const {
    mark_used(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = raw(key);
    return v ? to_double(key, *v) : fallback;
  }

  double require_double(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw ConfigError(key, "missing required key");
    return to_double(key, *v);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = raw(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto* end = v->data() + v->size();
    auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key, "not an integer: '" + *v + "'");
    return out;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto v = raw(key);
    return v ? *v : fallback;
  }

  /// Keys present in the file that no accessor has asked for.
  std::set<std::string> unused_keys() const {
    std::set<std::string> out;
    for (const auto& [k, _] : values_)
      if (!used_.count(k)) out.insert(k);
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(key, "not a number: '" + v + "'");
    }
  }

  void mark_used(const std::string& key) const { used_.insert(key); }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace torsim
