#include <doctest.h>

#include <cstdlib>
#include <limits>

#include "proadapt/common.hpp"

using namespace proadapt;

TEST_CASE("parse_date handles ISO dates") {
  const auto d = parse_date("2021-03-07");
  REQUIRE(d.has_value());
  CHECK(format_date(*d) == "2021-03-07");
  CHECK(year_of(*d) == 2021);
  CHECK(quarter_of(*d) == 1);
}

TEST_CASE("parse_date rejects invalid input") {
  CHECK_FALSE(parse_date("2021-13-01").has_value());
  CHECK_FALSE(parse_date("2021-02-30").has_value());
  CHECK_FALSE(parse_date("garbage").has_value());
  CHECK_FALSE(parse_date("2021-01-01x").has_value());
  CHECK_FALSE(parse_date("").has_value());
  CHECK(parse_date("2020-02-29").has_value());  // leap day
  CHECK_FALSE(parse_date("2021-02-29").has_value());
}

TEST_CASE("parse_date honors custom formats") {
  const auto d = parse_date("3/7/2021", "%m/%d/%Y");
  REQUIRE(d.has_value());
  CHECK(format_date(*d) == "2021-03-07");
  CHECK_FALSE(parse_date("2021-03-07", "%m/%d/%Y").has_value());
}

TEST_CASE("quarter arithmetic") {
  CHECK(quarter_of(*parse_date("2020-01-01")) == 1);
  CHECK(quarter_of(*parse_date("2020-03-31")) == 1);
  CHECK(quarter_of(*parse_date("2020-04-01")) == 2);
  CHECK(quarter_of(*parse_date("2020-12-31")) == 4);
  CHECK(period_label(quarter_start(2021, 3)) == "2021-Q3");
  CHECK(format_date(quarter_start(2020, 1)) == "2020-01-01");
  CHECK(format_date(quarter_start(2020, 4)) == "2020-10-01");
  CHECK(format_date(next_quarter_start(2020, 4)) == "2021-01-01");
  CHECK(format_date(next_quarter_start(2020, 2)) == "2020-07-01");
}

TEST_CASE("format_double round-trips exactly") {
  const double cases[] = {0.1,
                          0.1 + 0.2,
                          1.0 / 3.0,
                          -42.0,
                          0.0,
                          1e300,
                          5e-324,
                          3.141592653589793,
                          -2.2250738585072014e-308,
                          123456789.0};
  for (const double v : cases) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("format_double writes integers without exponent") {
  CHECK(format_double(42.0) == "42");
  CHECK(format_double(-7.0) == "-7");
  CHECK(format_double(0.0) == "0");
}

TEST_CASE("format_double names non-finite values") {
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("format_hex64 pads to 16 digits") {
  CHECK(format_hex64(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(format_hex64(0) == "0000000000000000");
  CHECK(format_hex64(~0ULL) == "ffffffffffffffff");
}
