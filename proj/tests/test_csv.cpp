#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "proadapt/common.hpp"
#include "proadapt/csv.hpp"

using namespace proadapt;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("parse_csv splits plain rows") {
  const CsvTable t = parse_csv("a,b,c\n1,2,3\n4,5,6\n");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "2", "3"});
  CHECK(t.rows[1] == std::vector<std::string>{"4", "5", "6"});
}

TEST_CASE("parse_csv honors quoting rules") {
  const CsvTable t = parse_csv("a,b\n\"x,y\",\"he said \"\"hi\"\"\"\n\"line\nbreak\",plain\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "x,y");
  CHECK(t.rows[0][1] == "he said \"hi\"");
  CHECK(t.rows[1][0] == "line\nbreak");
  CHECK(t.rows[1][1] == "plain");
}

TEST_CASE("parse_csv swallows CR and blank lines") {
  const CsvTable t = parse_csv("a,b\r\n1,2\r\n\r\n3,4\n\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "2"});
  CHECK(t.rows[1] == std::vector<std::string>{"3", "4"});
}

TEST_CASE("csv_field quotes only when needed") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("with,comma") == "\"with,comma\"");
  CHECK(csv_field("with\"quote") == "\"with\"\"quote\"");
  CHECK(csv_field("with\nnewline") == "\"with\nnewline\"");
  CHECK(csv_field("") == "");
}

TEST_CASE("CsvWriter output parses back identically") {
  const auto path = temp_file("csv_roundtrip.csv");
  {
    CsvWriter w(path, {"name", "note"});
    w.write_row({"alpha", "plain"});
    w.write_row({"beta, the second", "says \"hello\""});
    w.write_row({"gamma", "two\nlines"});
    w.close();
  }
  const CsvTable t = read_csv_file(path);
  CHECK(t.header == std::vector<std::string>{"name", "note"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[1][0] == "beta, the second");
  CHECK(t.rows[1][1] == "says \"hello\"");
  CHECK(t.rows[2][1] == "two\nlines");
  std::filesystem::remove(path);
}

TEST_CASE("CsvWriter rejects rows of the wrong width") {
  const auto path = temp_file("csv_width.csv");
  CsvWriter w(path, {"a", "b"});
  CHECK_THROWS_AS(w.write_row({"only one"}), ValidationError);
  w.close();
  std::filesystem::remove(path);
}

TEST_CASE("read_csv_file reports missing and empty files") {
  CHECK_THROWS_AS(read_csv_file("/no/such/file.csv"), IoError);
  const auto path = temp_file("csv_empty.csv");
  std::ofstream(path).close();
  CHECK_THROWS_AS(read_csv_file(path), ValidationError);
  std::filesystem::remove(path);
}
