#include "proadapt/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace proadapt {

namespace {

std::optional<int> read_digits(std::string_view text, std::size_t& pos, int min_digits, int max_digits) {
  int value = 0;
  int taken = 0;
  while (taken < max_digits && pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
    value = value * 10 + (text[pos] - '0');
    ++pos;
    ++taken;
  }
  if (taken < min_digits) return std::nullopt;
  return value;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text, std::string_view format) {
  int y = -1, m = -1, d = -1;
  std::size_t pos = 0;
  for (std::size_t fi = 0; fi < format.size(); ++fi) {
    if (format[fi] == '%') {
      if (++fi >= format.size()) return std::nullopt;
      std::optional<int> v;
      switch (format[fi]) {
        case 'Y': v = read_digits(text, pos, 4, 4); if (v) y = *v; break;
        case 'm': v = read_digits(text, pos, 1, 2); if (v) m = *v; break;
        case 'd': v = read_digits(text, pos, 1, 2); if (v) d = *v; break;
        default: return std::nullopt;
      }
      if (!v) return std::nullopt;
    } else {
      if (pos >= text.size() || text[pos] != format[fi]) return std::nullopt;
      ++pos;
    }
  }
  if (pos != text.size() || y < 0 || m < 0 || d < 0) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int year_of(Date date) {
  return static_cast<int>(std::chrono::year_month_day{date}.year());
}

int quarter_of(Date date) {
  const unsigned m = static_cast<unsigned>(std::chrono::year_month_day{date}.month());
  return static_cast<int>((m - 1) / 3 + 1);
}

std::string period_label(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-Q%d", year_of(date), quarter_of(date));
  return buf;
}

Date quarter_start(int year, int quarter) {
  return Date{std::chrono::year{year} / std::chrono::month{static_cast<unsigned>((quarter - 1) * 3 + 1)} /
              std::chrono::day{1}};
}

Date next_quarter_start(int year, int quarter) {
  return quarter == 4 ? quarter_start(year + 1, 1) : quarter_start(year, quarter + 1);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string format_hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace proadapt
