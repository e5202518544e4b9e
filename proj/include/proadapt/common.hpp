#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace proadapt {

// Rejected input: bad config values, malformed records, broken call contracts.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem trouble: missing paths, unreadable or unwritable files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::sys_days;

// Supported directives: %Y (4 digits), %m and %d (1-2 digits). Anything else in
// the format is matched literally. Returns nullopt on mismatch, trailing input,
// or a date that does not exist.
std::optional<Date> parse_date(std::string_view text, std::string_view format = "%Y-%m-%d");
std::string format_date(Date d);

int year_of(Date d);
int quarter_of(Date d);  // 1..4
std::string period_label(Date d);  // "2021-Q3"
Date quarter_start(int year, int quarter);
Date next_quarter_start(int year, int quarter);

// Shortest decimal string that strtod parses back to the same double.
std::string format_double(double v);

std::string format_hex64(std::uint64_t v);

}  // namespace proadapt
