#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace metaul {

// 17 significant digits; parses back to the identical double.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, or -1.
  int column(std::string_view name) const;
};

// Plain comma separated values without quoting. Throws IoError if the file
// cannot be opened and DataError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

// Strict full-string parse; throws DataError naming `what` on failure.
double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace metaul
