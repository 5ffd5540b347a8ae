#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace convrl {

using Rng = std::mt19937_64;

std::string to_lower(std::string_view s);

// Splits on runs of whitespace; never returns empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string trim(std::string_view s);

// Number of whitespace-delimited words.
std::size_t word_count(std::string_view s);

// Replaces every '\n' and '\r' with a space (single-line rendering).
std::string to_single_line(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

bool contains_token(const std::vector<std::string>& tokens, const std::string& t);

}  // namespace convrl
