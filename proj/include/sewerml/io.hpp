#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sewerml::io {

/// A comma-separated table with a mandatory header row. Fields may be
/// double-quoted; embedded quotes are doubled. Blank lines are skipped.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Index of a header column (exact match), if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double value);

/// Strict parse of a finite or non-finite decimal. Throws Error(kParse)
/// mentioning `context` on failure.
double parse_number(std::string_view text, std::string_view context);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over the target so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);

}  // namespace sewerml::io
