#pragma once

#include <cctype>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kgflow/common.hpp"

namespace kgflow::csv {

// Minimal RFC 4180 reader: comma separated, double-quote escaping, quoted
// fields may contain commas, quotes ("") and newlines. CR before LF is dropped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of stream. Blank lines are skipped.
  std::optional<std::vector<std::string>> next() {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    bool was_quoted = false;
    int c;
    while ((c = in_.get()) != std::char_traits<char>::eof()) {
      any = true;
      const char ch = static_cast<char>(c);
      if (in_quotes) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"' && field.empty() && !was_quoted) {
        in_quotes = true;
        was_quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (ch == '\n') {
        ++line_;
        if (fields.empty() && field.empty() && !was_quoted) {
          any = false;
          continue;
        }
        fields.push_back(std::move(field));
        return fields;
      } else if (ch == '\r') {
        if (in_.peek() != '\n') field.push_back(ch);
      } else {
        field.push_back(ch);
      }
    }
    if (in_quotes) throw Error("csv: unterminated quoted field near line " + std::to_string(line_ + 1));
    if (!any || (fields.empty() && field.empty() && !was_quoted)) return std::nullopt;
    ++line_;
    fields.push_back(std::move(field));
    return fields;
  }

  // 1-based line number of the last record returned.
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

// Maps header names (case-insensitive) to column positions.
class Header {
 public:
  explicit Header(std::vector<std::string> names) : names_(std::move(names)) {}

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (iequals(names_[i], name)) return i;
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view name, std::string_view what) const {
    if (auto i = find(name)) return *i;
    throw Error(std::string(what) + ": missing column '" + std::string(name) + "'");
  }

  std::size_t size() const { return names_.size(); }

 private:
  static bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(a[i])) !=
          std::tolower(static_cast<unsigned char>(b[i])))
        return false;
    }
    return true;
  }

  std::vector<std::string> names_;
};

}  // namespace kgflow::csv
