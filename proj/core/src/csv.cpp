#include "ganfp/csv.hpp"

#include <charconv>
#include <fstream>

#include "ganfp/error.hpp"

namespace ganfp::csv {

std::string format(double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    std::string_view field = trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::string::npos;
}

Table read_table(const std::string& path, char sep, std::string_view header_first_field) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, sep);
    if (t.header.empty()) {
      if (!header_first_field.empty() && (fields.empty() || fields[0] != header_first_field)) continue;
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(path + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) {
    throw FormatError(path + (header_first_field.empty()
                                  ? std::string(": empty file")
                                  : ": no header line starting with '" + std::string(header_first_field) + "'"));
  }
  return t;
}

double parse_double(std::string_view text, std::size_t line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("not a number: '" + std::string(text) + "'", line);
  }
  return v;
}

}  // namespace ganfp::csv
