#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace shuttle {

// Minimal reader for the unquoted numeric CSV files the toolkit writes.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(std::string_view line);

/// First non-empty line is the header; every row must match its width.
CsvTable read_csv(std::istream& in);

double parse_double(const std::string& text, std::string_view field);
std::size_t parse_index(const std::string& text, std::string_view field);

}  // namespace shuttle
