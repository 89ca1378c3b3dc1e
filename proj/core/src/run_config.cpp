#include "ozlab/run_config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace oz {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

int64_t parse_i64(const std::string& token, const std::string& where, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(token.c_str(), &end, 10);
  if (errno != 0 || end == token.c_str() || *end != '\0')
    fail(where, "value for '" + key + "' is not an integer: '" + token + "'");
  return v;
}

double parse_f64(const std::string& token, const std::string& where, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (errno != 0 || end == token.c_str() || *end != '\0' || !std::isfinite(v))
    fail(where, "value for '" + key + "' is not a finite number: '" + token + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

RunConfig from_json(const std::string& text, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) fail(path, "top-level JSON value must be an object");
  RunConfig cfg;
  cfg.path = path;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (!valid_key(key)) fail(path, "bad config key '" + key + "'");
    const auto& v = it.value();
    std::string text_value;
    auto scalar = [&](const nlohmann::json& s) -> std::string {
      if (s.is_string()) return s.get<std::string>();
      if (s.is_boolean()) return s.get<bool>() ? "true" : "false";
      if (s.is_number_integer()) return std::to_string(s.get<int64_t>());
      if (s.is_number_unsigned()) return std::to_string(s.get<uint64_t>());
      if (s.is_number_float()) return g17(s.get<double>());
      fail(path, "value for '" + key + "' must be a scalar or an array of scalars");
    };
    if (v.is_array()) {
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) text_value += ' ';
        text_value += scalar(v[i]);
      }
    } else {
      text_value = scalar(v);
    }
    cfg.values[key] = text_value;
    cfg.lines[key] = 0;
  }
  return cfg;
}

RunConfig from_kv(const std::string& text, const std::string& path) {
  RunConfig cfg;
  cfg.path = path;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    size_t eq = body.find('=');
    if (eq == std::string::npos) fail(where, "expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (!valid_key(key)) fail(where, "bad config key '" + key + "'");
    if (value.empty()) fail(where, "empty value for key '" + key + "'");
    if (cfg.values.count(key))
      fail(where, "duplicate config key '" + key + "' (first set at line " +
                      std::to_string(cfg.lines[key]) + ")");
    cfg.values[key] = value;
    cfg.lines[key] = lineno;
  }
  return cfg;
}

}  // namespace

bool RunConfig::has(const std::string& key) const { return values.count(key) != 0; }

std::string RunConfig::where(const std::string& key) const {
  auto it = lines.find(key);
  if (it != lines.end() && it->second > 0) return path + ":" + std::to_string(it->second);
  return path;
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) fail(path, "missing required config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

int64_t RunConfig::get_int(const std::string& key) const {
  return parse_i64(get_string(key), where(key), key);
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double RunConfig::get_double(const std::string& key) const {
  return parse_f64(get_string(key), where(key), key);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get_string(key);
  for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(where(key), "value for '" + key + "' is not a boolean: '" + get_string(key) + "'");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<int64_t> RunConfig::get_int_list(const std::string& key) const {
  auto tokens = split_ws(get_string(key));
  if (tokens.empty()) fail(where(key), "empty list for key '" + key + "'");
  std::vector<int64_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(parse_i64(t, where(key), key));
  return out;
}

std::vector<int64_t> RunConfig::get_int_list(const std::string& key,
                                             const std::vector<int64_t>& fallback) const {
  return has(key) ? get_int_list(key) : fallback;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  auto tokens = split_ws(get_string(key));
  if (tokens.empty()) fail(where(key), "empty list for key '" + key + "'");
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(parse_f64(t, where(key), key));
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
  return has(key) ? get_double_list(key) : fallback;
}

void RunConfig::require_known_keys(const std::vector<std::string>& allowed) const {
  for (const auto& kv : values) {
    bool known = false;
    for (const auto& a : allowed)
      if (kv.first == a) {
        known = true;
        break;
      }
    if (!known) fail(where(kv.first), "unknown config key '" + kv.first + "'");
  }
}

std::string RunConfig::snapshot() const {
  std::string out;
  for (const auto& kv : values) out += kv.first + " = " + kv.second + "\n";
  return out;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

RunConfig parse_config_text(const std::string& text, const std::string& path) {
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return from_json(text, path);
  return from_kv(text, path);
}

}  // namespace oz
