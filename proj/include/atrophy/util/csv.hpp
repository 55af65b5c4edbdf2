#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace atrophy {

/// Header row plus data rows. Fields are whitespace-trimmed; double-quoted
/// fields may contain commas and "" escapes. Blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by header name, or -1.
  int column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Quotes the field when it contains a comma, quote, or newline.
std::string csv_escape(std::string_view field);

std::string trim(std::string_view s);

}  // namespace atrophy
