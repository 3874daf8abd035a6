#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rqdet {

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header line
  std::vector<std::vector<double>> rows;
};

/// Reads a comma-separated numeric table. Blank lines and lines starting with
/// '#' are skipped; a first line that does not parse as numbers is taken as
/// the header. Every row must have between min_cols and max_cols fields.
CsvTable read_numeric_csv(std::istream& in, std::size_t min_cols, std::size_t max_cols);
CsvTable read_numeric_csv_file(const std::string& path, std::size_t min_cols, std::size_t max_cols);

/// General format with 17 significant digits.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace rqdet
