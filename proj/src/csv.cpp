#include "proadapt/csv.hpp"

#include <sstream>

#include "proadapt/common.hpp"

namespace proadapt {

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row.size() > 1 || !row.front().empty()) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
      row_has_content = true;
      ++i;
    } else if (c == ',') {
      end_field();
      row_has_content = true;
      ++i;
    } else if (c == '\n') {
      end_row();
      ++i;
    } else if (c == '\r') {
      ++i;
    } else {
      field += c;
      row_has_content = true;
      ++i;
    }
  }
  if (row_has_content || !field.empty() || !row.empty()) end_row();

  CsvTable table;
  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  table.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return std::move(buf).str();
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  CsvTable table = parse_csv(read_file(path));
  if (table.header.empty()) throw ValidationError(path.string() + " is empty; expected a CSV header row");
  return table;
}

std::string csv_field(std::string_view raw) {
  const bool needs_quote = raw.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quote) return std::string(raw);
  std::string quoted = "\"";
  for (const char c : raw) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), path_(path), width_(header.size()) {
  if (!out_) throw IoError("cannot write " + path.string());
  write_row(header);
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) {
    throw ValidationError("row width " + std::to_string(fields.size()) + " does not match header width " +
                          std::to_string(width_) + " in " + path_.string());
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_field(fields[i]);
  }
  out_ << '\n';
  if (!out_) throw IoError("failed writing " + path_.string());
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw IoError("failed writing " + path_.string());
}

}  // namespace proadapt
