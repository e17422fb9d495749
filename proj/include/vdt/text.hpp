#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vdt::text {

// Fixed-point with the given number of fractional digits, locale independent.
std::string format_fixed(double value, int digits = 6);

// Shortest representation that round-trips exactly.
std::string format_exact(double value);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

// Rounds through the 6-digit CSV representation so in-memory values equal re-ingested ones.
double quantize6(double value);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

}  // namespace vdt::text
