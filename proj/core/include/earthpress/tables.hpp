#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace earthpress {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Comma-separated numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws IoError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

/// The exact text write_csv would produce.
std::string csv_text(const Table& table);
void write_csv(const std::filesystem::path& path, const Table& table);
/// Throws IoError on unreadable files or non-numeric cells.
Table read_csv(const std::filesystem::path& path);

/// Creates parent directories and truncates any existing file.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace earthpress
