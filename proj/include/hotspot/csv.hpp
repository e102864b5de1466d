#pragma once

// Minimal comma-separated text helpers shared by the readers and writers.
// Fields never contain commas or quotes in any of the formats used here.

#include <charconv>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hotspot::csv {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(std::string_view line);
std::string_view trim(std::string_view s);

/// Reads the header line and throws ParseError unless it equals `expected`.
void expect_header(std::istream& in, std::string_view expected);

/// Next non-empty line, with any trailing '\r' removed.
bool next_row(std::istream& in, std::string& line);

double to_double(std::string_view field);
long long to_int(std::string_view field);

/// Shortest round-trip representation; identical inputs give identical text.
std::string format(double value);

inline std::string format(long long value) { return std::to_string(value); }
inline std::string format(int value) { return std::to_string(value); }
inline std::string format(std::size_t value) { return std::to_string(value); }

}  // namespace hotspot::csv
