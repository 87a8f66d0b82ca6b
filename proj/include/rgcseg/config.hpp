#pragma once

// Plain-text key=value configuration. Lines starting with '#' are comments.
// Later assignments win, so flag overrides are applied by merging on top of
// the file contents.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace rgcseg {

class ConfigParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& is, const std::string& source = "<config>");
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv, const std::string& line_prefix = "");

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

double kv_double(const KeyValues& kv, const std::string& key, double fallback);
std::int64_t kv_int(const KeyValues& kv, const std::string& key, std::int64_t fallback);
std::uint64_t kv_uint(const KeyValues& kv, const std::string& key, std::uint64_t fallback);
bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback);

}  // namespace rgcseg
