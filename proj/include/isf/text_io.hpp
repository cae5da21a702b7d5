#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isf {

std::vector<std::string> split_whitespace(std::string_view line);

std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

/// Reads a whitespace-tokenized text file, one sentence per line. Blank lines
/// are kept as empty sentences so line numbers stay aligned with indices.
std::vector<std::vector<std::string>> read_text_corpus(const std::filesystem::path& path);

void write_text_corpus(const std::filesystem::path& path,
                       std::span<const std::vector<std::string>> sentences);

std::string read_file(const std::filesystem::path& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

/// Shortest round-trippable decimal form of a double ("%.17g").
std::string format_double(double value);

/// Strict double parse; throws std::invalid_argument on trailing garbage.
double parse_double(std::string_view text);

std::int64_t parse_int(std::string_view text);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace isf
