#pragma once

// Internal helpers for the plain-text file formats.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace uavip::detail {

std::vector<std::string> split_fields(std::string_view line, char sep = ',');
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// 17 significant digits, so the text parses back to the identical double.
std::string format_double(double value);

// Strict parsers; throw std::invalid_argument on any trailing garbage.
double parse_double(const std::string& text);
long long parse_integer(const std::string& text);
std::size_t parse_index(const std::string& text);

}  // namespace uavip::detail
