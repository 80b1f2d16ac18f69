#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pkw::text {

std::vector<std::string> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view s);
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
// printf-style %.<digits>g
std::string format_sig(double value, int digits);
// Picks ',' ';' or '\t' from a header line (',' if none present).
char detect_delimiter(std::string_view header);

// 64-bit FNV-1a, used for config hashes in artifact metadata.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace pkw::text
