#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

std::string_view trim(std::string_view s);

/// Trims and collapses every run of whitespace (including newlines) into a
/// single space.
std::string collapse_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Case-insensitive substring test over whitespace-collapsed text.
bool contains_ci(std::string_view haystack, std::string_view needle);

std::uint64_t fnv1a64(std::string_view s);

std::string sha256_hex(std::string_view data);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_now_iso8601();

/// Accepts YYYY-MM-DD optionally followed by a time part ('T' or ' ').
bool looks_like_iso8601(std::string_view s);

}  // namespace memloop
