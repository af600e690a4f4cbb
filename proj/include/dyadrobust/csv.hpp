#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dyadrobust::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: comma delimiter, double-quote quoting with "" escapes,
// quoted fields may span lines. Accepts LF or CRLF line endings. Lines
// starting with '#' outside a quoted field are skipped when skip_comments.
class Reader {
 public:
  explicit Reader(std::istream& in, bool skip_comments = false)
      : in_(in), skip_comments_(skip_comments) {}

  // Reads the next record; returns false at end of input.
  bool next(Row& row);

  // 1-based physical line where the last returned record started.
  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  bool skip_comments_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

std::string quote_field(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace dyadrobust::csv
