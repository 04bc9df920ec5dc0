#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tamrf::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated. Every row
/// must have as many fields as the header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

std::string read_text_file(const std::filesystem::path& path);
/// Writes bytes exactly (binary mode), creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Shortest decimal that round-trips the double ("-12.5", "0.1").
std::string format_number(double v);

std::string trim(std::string_view s);
/// Splits on commas and/or whitespace, dropping empty tokens.
std::vector<std::string> split_list(std::string_view s);

}  // namespace tamrf::io
