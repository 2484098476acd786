#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace signlab {

// %.17g, so parsing the text gives back the same double. Non-finite values
// print as nan, inf, -inf.
std::string format_double(double v);

// Quotes fields containing a comma, quote, CR or LF; doubles inner quotes.
std::string csv_escape(std::string_view field);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  // Throws if the row width differs from the header.
  void add_row(std::vector<std::string> row);

  std::string to_string() const;  // CRLF line endings
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Parses RFC-4180 text, first record is the header.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace signlab
