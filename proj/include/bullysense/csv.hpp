#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bullysense::csv {

// Minimal CSV reader tuned for the insult-comment corpus: comma separated,
// double-quoted fields may contain commas and doubled quotes. Inside a
// quoted field a quote preceded by an odd run of backslashes does not end
// the field (the corpus stores comments backslash-escaped, e.g. \" \n).
struct Record {
  std::vector<std::string> fields;
  size_t line_number = 0;  // 1-based line of the record start
};

class Reader {
 public:
  explicit Reader(std::string content);
  // Returns false at end of input. Skips blank lines.
  bool next(Record& out);

 private:
  std::string content_;
  size_t pos_ = 0;
  size_t line_ = 1;
};

// Writes one record; quotes every field that needs it (comma, quote, CR/LF).
std::string format_record(const std::vector<std::string>& fields);

}  // namespace bullysense::csv
