#include "bullysense/csv.hpp"

#include <utility>

namespace bullysense::csv {

Reader::Reader(std::string content) : content_(std::move(content)) {
  // Drop a UTF-8 BOM if present.
  if (content_.size() >= 3 && content_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
}

bool Reader::next(Record& out) {
  const std::string& s = content_;
  // Skip blank lines.
  while (pos_ < s.size() && (s[pos_] == '\n' || s[pos_] == '\r')) {
    if (s[pos_] == '\n') ++line_;
    ++pos_;
  }
  if (pos_ >= s.size()) return false;

  out.fields.clear();
  out.line_number = line_;
  std::string field;
  bool in_quotes = false;
  size_t backslash_run = 0;

  auto push_field = [&] {
    out.fields.push_back(field);
    field.clear();
  };

  while (pos_ < s.size()) {
    char c = s[pos_];
    if (in_quotes) {
      if (c == '"' && backslash_run % 2 == 0) {
        if (pos_ + 1 < s.size() && s[pos_ + 1] == '"') {
          field.push_back('"');  // doubled quote
          pos_ += 2;
          backslash_run = 0;
          continue;
        }
        in_quotes = false;
        ++pos_;
        backslash_run = 0;
        continue;
      }
      if (c == '\n') ++line_;
      backslash_run = (c == '\\') ? backslash_run + 1 : 0;
      field.push_back(c);
      ++pos_;
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      backslash_run = 0;
      ++pos_;
      continue;
    }
    if (c == ',') {
      push_field();
      ++pos_;
      continue;
    }
    if (c == '\r') {
      ++pos_;
      continue;
    }
    if (c == '\n') {
      ++pos_;
      ++line_;
      break;
    }
    field.push_back(c);
    ++pos_;
  }
  push_field();
  return true;
}

std::string format_record(const std::vector<std::string>& fields) {
  std::string line;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) line.push_back(',');
    const std::string& f = fields[i];
    bool need_quotes = f.find_first_of(",\"\r\n") != std::string::npos;
    if (!need_quotes) {
      line += f;
      continue;
    }
    line.push_back('"');
    for (char c : f) {
      if (c == '"') line.push_back('"');
      line.push_back(c);
    }
    line.push_back('"');
  }
  line.push_back('\n');
  return line;
}

}  // namespace bullysense::csv
