#include "rgcseg/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace rgcseg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigParseError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

KeyValues parse_key_values(std::istream& is, const std::string& source) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigParseError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigParseError(path.string() + ": cannot open config file");
  return parse_key_values(is, path.string());
}

std::string format_key_values(const KeyValues& kv, const std::string& line_prefix) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << line_prefix << k << '=' << v << '\n';
  return os.str();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_number<double>(key, it->second);
}

std::int64_t kv_int(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_number<std::int64_t>(key, it->second);
}

std::uint64_t kv_uint(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_number<std::uint64_t>(key, it->second);
}

bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigParseError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace rgcseg
