#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace proadapt {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Quoted fields may contain commas, newlines, and doubled quotes. Blank lines
// are dropped. The first row is the header.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Quotes the field only when it needs it.
std::string csv_field(std::string_view raw);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t width_;
};

}  // namespace proadapt
