#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace framelens::io {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Calls `on_line(line_number, text)` for every non-blank line. Line numbers start at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, std::string_view)>& on_line);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::string> parse_csv_row(std::string_view line);

/// Fixed-point decimal with `digits` fractional digits ("%.*f").
std::string fixed(double value, int digits);

}  // namespace framelens::io
