#include "climprice/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "climprice/error.hpp"

namespace climprice::csv {

namespace {

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

}  // namespace

Table parse(std::string_view text, std::string_view source) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::vector<Row> records;
  Row current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool in_quotes = false;
  bool field_started = false;
  bool quoted_field = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
    quoted_field = false;
  };
  auto end_record = [&](std::size_t next_line) {
    end_field();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) records.push_back(std::move(current));
    current = Row{};
    current.line = next_line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started) fail(ErrorCode::ParseError, where(source, line) + ": stray quote inside field");
        in_quotes = true;
        field_started = true;
        quoted_field = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record(line);
        break;
      default:
        if (quoted_field) fail(ErrorCode::ParseError, where(source, line) + ": text after closing quote");
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) fail(ErrorCode::ParseError, where(source, line) + ": unterminated quoted field");
  if (field_started || !current.fields.empty()) end_record(line);

  if (records.empty()) fail(ErrorCode::ParseError, std::string(source) + ": empty file");
  Table table;
  table.header = std::move(records.front().fields);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != table.header.size()) {
      fail(ErrorCode::ParseError, where(source, records[r].line) + ": expected " +
                                      std::to_string(table.header.size()) + " fields, found " +
                                      std::to_string(records[r].fields.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

double parse_number(std::string_view field, std::string_view source, std::size_t line) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail(ErrorCode::ParseError, where(source, line) + ": not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::string format_number(double value) {
  if (std::isnan(value)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value == 0.0 ? 0.0 : value);
  return buf;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace climprice::csv
