#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace repair {

// Stable 64-bit FNV-1a. Used for mock-embedder token buckets and for
// content-addressed cache filenames; must not change across platforms.
std::uint64_t fnv1a64(const std::string& data);

// fnv1a64 rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(const std::string& data);

std::string trim(const std::string& s);

std::vector<std::string> split_whitespace(const std::string& s);

// Locale-independent "%.<prec>f". std::to_string is locale-sensitive and
// std::format is unavailable on the toolchains we target.
std::string format_fixed(double value, int precision);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace repair
