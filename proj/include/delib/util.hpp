#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace delib {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Non-empty lines of a JSONL file. A trailing line without a newline that
// fails to parse is treated as a torn write and dropped.
std::vector<std::string> read_jsonl_lines(const std::filesystem::path& path);

// UTC timestamp, ISO-8601 with second precision.
std::string utc_now_iso8601();

// Fixed-point rendering ("%.*f") used by every table writer.
std::string fixed(double value, int digits);

}  // namespace delib
