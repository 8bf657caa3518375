#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sedloss {

/// Ordered `key=value` pairs. Blank lines and lines starting with '#' are
/// skipped; whitespace around keys and values is trimmed.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Throws ValidationError on a line without '=' or a repeated key.
KeyValues parse_key_values(std::istream& is, const std::string& source = "input");
KeyValues read_key_value_file(const std::string& path);

std::map<std::string, std::string> to_map(const KeyValues& kv);

/// Shortest text that round-trips exactly (at most 17 significant digits).
std::string format_double(double v);
/// Strict parse; trailing garbage is an error.
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& s);

}  // namespace sedloss
