#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asyncdsb::detail {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
void write_bytes(const std::filesystem::path& path, const void* data, std::size_t n);

// `key=value` lines, whitespace trimmed, '#' comments and blank lines skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_uint(std::string_view s, std::string_view what);

}  // namespace asyncdsb::detail
