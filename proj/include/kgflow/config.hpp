#pragma once

#include <charconv>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kgflow/common.hpp"

namespace kgflow {

// `key = value` lines; '#' starts a comment; later keys override earlier ones.
// Readers mark the keys they consume so callers can reject unknown ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error("config line " + std::to_string(lineno) + ": expected key=value");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Leaves `target` unchanged when the key is absent.
  void read(const std::string& key, std::string& target) {
    if (auto it = values_.find(key); it != values_.end()) {
      target = it->second;
      used_.insert(key);
    }
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    target = convert<T>(key, it->second);
  }

  template <typename T>
  void read_list(const std::string& key, std::vector<T>& target) {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    target.clear();
    std::stringstream ss(it->second);
    for (std::string item; std::getline(ss, item, ',');) {
      item = trim(item);
      if (item.empty()) continue;
      if constexpr (std::is_same_v<T, std::string>) {
        target.push_back(item);
      } else {
        target.push_back(convert<T>(key, item));
      }
    }
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

  void reject_unused() const {
    const auto unused = unused_keys();
    if (unused.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const auto& k : unused) msg += " " + k;
    throw Error(msg);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  template <typename T>
  static T convert(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw Error("config key '" + key + "': expected a boolean, got '" + text + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return static_cast<T>(v);
      } catch (const std::exception&) {
        throw Error("config key '" + key + "': expected a number, got '" + text + "'");
      }
    } else {
      T v{};
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error("config key '" + key + "': expected an integer, got '" + text + "'");
      }
      return v;
    }
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace kgflow
