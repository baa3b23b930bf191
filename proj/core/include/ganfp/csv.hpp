#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ganfp::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double value);

/// Splits one line on `sep`; no quoting support beyond stripping a pair of
/// surrounding double quotes per field.
std::vector<std::string> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for error messages.
  std::vector<std::size_t> lines;

  /// Index of a header column, or npos.
  std::size_t column(std::string_view name) const;
};

/// Reads a headed CSV file. Blank lines are skipped. With `header_first_field`
/// set, every line before the first one whose leading field equals it is
/// skipped too (license preambles). Throws FormatError when the file cannot
/// be opened or a row has the wrong field count.
Table read_table(const std::string& path, char sep = ',', std::string_view header_first_field = {});

/// Throws ParseError carrying `line` when `text` is not a complete number.
double parse_double(std::string_view text, std::size_t line);

}  // namespace ganfp::csv
