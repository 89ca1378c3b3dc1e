#pragma once
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace oz {

// Configuration problems carry the file and, for the key-value format, the
// line where the offending entry lives.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat string-to-string configuration with provenance. Values keep their
// raw text; typed access validates on demand. Lists are space separated.
struct RunConfig {
  std::string path;
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;  // 0 when the source had no line info

  bool has(const std::string& key) const;
  std::string where(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  // Throws naming the first key outside `allowed`.
  void require_known_keys(const std::vector<std::string>& allowed) const;

  // Canonical "key = value" lines, sorted by key. Used for the manifest
  // snapshot and for byte-identity checks.
  std::string snapshot() const;
};

// Detects the format by the first non-space byte: '{' parses as a flat JSON
// object (string, number, and bool values), anything else as "key = value"
// lines with '#' comments.
RunConfig load_config(const std::string& path);

RunConfig parse_config_text(const std::string& text, const std::string& path);

}  // namespace oz
