#include "tportal/date.hpp"

#include <charconv>
#include <cstdio>

#include "tportal/error.hpp"

namespace tportal {

namespace {

using std::chrono::sys_days;
using std::chrono::year_month_day;

template <typename T>
bool parse_int(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date::Date(int y, unsigned m, unsigned d) {
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::InvalidArgument, "invalid calendar date");
  }
  days_ = static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count());
}

Date Date::parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::InvalidArgument, "date must be YYYY-MM-DD: '" + std::string(text) + "'");
  }
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    throw Error(ErrorCode::InvalidArgument, "date must be YYYY-MM-DD: '" + std::string(text) + "'");
  }
  return Date(y, m, d);
}

std::string Date::to_string() const {
  const year_month_day ymd{sys_days{std::chrono::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const {
  const year_month_day ymd{sys_days{std::chrono::days{days_}}};
  return static_cast<int>(ymd.year());
}

}  // namespace tportal
