#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace speechyolo {

struct CsvRow {
  std::size_t line = 0;  // 1-based source line
  std::vector<std::string> fields;
};

// Minimal RFC 4180 reader: comma separated, double-quote escaping, no
// embedded newlines. Blank lines are skipped.
std::vector<CsvRow> parse_csv(std::string_view text);

std::string csv_escape(const std::string& field);

// Strict numeric parse; throws FormatError naming `line` on failure.
double parse_double(const std::string& s, std::size_t line);

}  // namespace speechyolo
