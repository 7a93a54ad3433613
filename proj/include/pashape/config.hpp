// SPDX-License-Identifier: Apache-2.0
//
// Flat "key = value" experiment configuration with [section] headers.
// Diff-friendly, no schema dependency; units are spelled out in key names
// (span_length_km, symbol_rate_gbd, ...). Parsing then re-emitting is
// idempotent: dump() produces a canonical form.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pashape {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::size_t cur = npos();
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
        std::string name = trim(t.substr(1, t.size() - 2));
        if (name.empty())
          throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
        cur = cfg.section_index(name, /*create=*/true);
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (cur == npos()) cur = cfg.section_index("", /*create=*/true);
      auto& sec = cfg.sections_[cur];
      for (auto& e : sec.entries)
        if (e.key == key)
          throw ConfigError("duplicate key '" + key + "' in section [" + sec.name + "]");
      sec.entries.push_back({key, value});
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  std::string dump() const {
    std::string out;
    for (const auto& sec : sections_) {
      if (!sec.name.empty()) {
        out += '[';
        out += sec.name;
        out += "]\n";
      }
      for (const auto& e : sec.entries) {
        out += e.key;
        out += " = ";
        out += e.value;
        out += '\n';
      }
      out += '\n';
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
  }

  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  std::string get_str(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    if (!v) throw ConfigError("missing config key [" + section + "] " + key);
    return *v;
  }
  std::string get_str(const std::string& section, const std::string& key,
                      const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(section, key, get_str(section, key));
  }
  double get_double(const std::string& section, const std::string& key, double fallback) const {
    const std::string* v = find(section, key);
    return v ? to_double(section, key, *v) : fallback;
  }

  std::int64_t get_int(const std::string& section, const std::string& key) const {
    return to_int(section, key, get_str(section, key));
  }
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    const std::string* v = find(section, key);
    return v ? to_int(section, key, *v) : fallback;
  }

  std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    std::istringstream ss(get_str(section, key));
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_double(section, key, trim(tok)));
    if (out.empty()) throw ConfigError("empty list for [" + section + "] " + key);
    return out;
  }

  std::vector<std::string> get_str_list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream ss(get_str(section, key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::string t = trim(tok);
      if (!t.empty()) out.push_back(t);
    }
    if (out.empty()) throw ConfigError("empty list for [" + section + "] " + key);
    return out;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    auto& sec = sections_[section_index(section, true)];
    for (auto& e : sec.entries)
      if (e.key == key) {
        e.value = value;
        return;
      }
    sec.entries.push_back({key, value});
  }

  const std::vector<Section>& sections() const { return sections_; }

 private:
  static std::size_t npos() { return static_cast<std::size_t>(-1); }

  static std::string strip_comment(const std::string& s) {
    auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static double to_double(const std::string& sec, const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + v + "' for [" + sec + "] " + key);
    }
  }
  static std::int64_t to_int(const std::string& sec, const std::string& key,
                             const std::string& v) {
    try {
      std::size_t used = 0;
      long long i = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return i;
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + v + "' for [" + sec + "] " + key);
    }
  }

  std::size_t section_index(const std::string& name, bool create) {
    for (std::size_t i = 0; i < sections_.size(); ++i)
      if (sections_[i].name == name) return i;
    if (!create) return npos();
    sections_.push_back({name, {}});
    return sections_.size() - 1;
  }

  const std::string* find(const std::string& section, const std::string& key) const {
    for (const auto& sec : sections_)
      if (sec.name == section)
        for (const auto& e : sec.entries)
          if (e.key == key) return &e.value;
    return nullptr;
  }

  std::vector<Section> sections_;
};

}  // namespace pashape
