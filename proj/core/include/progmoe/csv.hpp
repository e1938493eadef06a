#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace progmoe::csv {

/// Splits one line on commas and trims surrounding whitespace from each field.
/// Quoting is not supported; region names and ids must not contain commas.
std::vector<std::string> split_line(std::string_view line);

/// Strict float parse ('.' decimal separator, no trailing garbage).
/// Throws ParseError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);

/// Shortest representation that round-trips to the same double.
std::string format_double(double value);

/// Reads the next non-empty line; returns false at end of stream.
bool next_line(std::istream& in, std::string& line);

}  // namespace progmoe::csv
