#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynrec::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index by name; throws Error(kParse) naming the file when absent.
  std::size_t column(std::string_view name, std::string_view source) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

/// Plain comma-separated text: no quoting, blank lines skipped, CRLF tolerated.
Table read_file(const std::filesystem::path& path);
Table parse(std::string_view text);

std::vector<std::string> split_line(std::string_view line, char sep = ',');

/// Shortest round-trip decimal form.
std::string format_number(double v);
/// Strict full-string parse; nullopt for empty or malformed cells.
std::optional<double> parse_number(std::string_view s);

std::string join(const std::vector<std::string>& cells, char sep = ',');

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace dynrec::csv
