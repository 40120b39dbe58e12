#include "cdbnmf/csv.hpp"

#include <istream>

#include "cdbnmf/error.hpp"

namespace cdbnmf::csv {

std::vector<Record> read(std::istream& in) {
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    Record rec;
    rec.line = line_no;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char ch = line[i];
      if (quoted) {
        if (ch == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(ch);
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
      } else {
        field.push_back(ch);
      }
    }
    if (quoted) throw ParseError(line_no, "unterminated quoted field");
    rec.fields.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  return records;
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace cdbnmf::csv
