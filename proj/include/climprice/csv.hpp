#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace climprice::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF. The first record
// is the header. Throws ParseError (with line) on malformed input or an empty file.
Table parse(std::string_view text, std::string_view source);
Table read(const std::filesystem::path& path);

// Parses a decimal number ('.' separator). Empty -> NaN. Throws ParseError.
double parse_number(std::string_view field, std::string_view source, std::size_t line);

// Shortest round-trip representation; NaN is written as an empty field.
std::string format_number(double value);
// Fixed-point with the given number of decimals, for human-facing tables.
std::string format_fixed(double value, int decimals);

std::string escape(std::string_view field);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace climprice::csv
