#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdbnmf::csv {

struct Record {
  std::size_t line = 0;  // 1-based source line
  std::vector<std::string> fields;
};

// Reads comma-separated records. Double-quoted fields may contain commas and
// "" escapes; fields are not trimmed except for a trailing '\r'. Blank lines
// are skipped. Throws ParseError on an unterminated quote.
std::vector<Record> read(std::istream& in);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(const std::string& field);

}  // namespace cdbnmf::csv
