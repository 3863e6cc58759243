#include "date.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "error.hpp"

namespace dynrec {

using namespace std::chrono;

Date make_date(int y, unsigned m, unsigned d) {
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) fail(ErrorKind::kInvalidArgument, "invalid calendar date");
  return sys_days{ymd};
}

std::optional<Date> try_parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t off, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(s.data() + off, s.data() + off + len, out);
    return ec == std::errc{} && p == s.data() + off + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

Date parse_date(std::string_view s) {
  auto d = try_parse_date(s);
  if (!d) fail(ErrorKind::kParse, "invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)");
  return *d;
}

std::string format_date(Date d) {
  year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

int year_of(Date d) { return int(year_month_day{d}.year()); }
unsigned month_of(Date d) { return unsigned(year_month_day{d}.month()); }
unsigned day_of(Date d) { return unsigned(year_month_day{d}.day()); }

Date add_months(Date d, int n) {
  year_month_day ymd{d};
  year_month_day moved = ymd + months{n};
  if (!moved.ok()) moved = year_month_day_last{moved.year(), month_day_last{moved.month()}};
  return sys_days{moved};
}

Date Quarter::start() const { return make_date(year, unsigned(3 * (q - 1) + 1), 1); }

Date Quarter::end() const {
  year_month_day_last last{std::chrono::year{year}, month_day_last{month{unsigned(3 * q)}}};
  return sys_days{last};
}

Quarter Quarter::next(int n) const { return from_ordinal(ordinal() + n); }

Quarter Quarter::from_ordinal(int ord) {
  int y = ord >= 0 ? ord / 4 : -((-ord + 3) / 4);
  return Quarter{y, ord - y * 4 + 1};
}

Quarter Quarter::containing(Date d) {
  year_month_day ymd{d};
  return Quarter{int(ymd.year()), int((unsigned(ymd.month()) - 1) / 3 + 1)};
}

bool is_quarter_end(Date d) { return Quarter::containing(d).end() == d; }
bool is_quarter_start(Date d) { return Quarter::containing(d).start() == d; }

Date lagged_trade_anchor(Date quarter_end) { return add_months(quarter_end + days{1}, 2); }

bool is_weekday(Date d) {
  unsigned wd = weekday{d}.c_encoding();
  return wd != 0 && wd != 6;
}

TradingDays::TradingDays(std::vector<Date> days) : days_(std::move(days)) {
  std::sort(days_.begin(), days_.end());
  days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
}

TradingDays TradingDays::weekdays(Date first, Date last, const std::vector<Date>& holidays) {
  std::vector<Date> out;
  for (Date d = first; d <= last; d += std::chrono::days{1}) {
    if (is_weekday(d) && std::find(holidays.begin(), holidays.end(), d) == holidays.end())
      out.push_back(d);
  }
  return TradingDays(std::move(out));
}

std::optional<Date> TradingDays::on_or_after(Date d) const {
  auto it = std::lower_bound(days_.begin(), days_.end(), d);
  if (it == days_.end()) return std::nullopt;
  return *it;
}

std::optional<Date> TradingDays::on_or_before(Date d) const {
  auto it = std::upper_bound(days_.begin(), days_.end(), d);
  if (it == days_.begin()) return std::nullopt;
  return *std::prev(it);
}

bool TradingDays::contains(Date d) const { return std::binary_search(days_.begin(), days_.end(), d); }

std::vector<Date> TradingDays::between(Date from, Date to) const {
  auto lo = std::lower_bound(days_.begin(), days_.end(), from);
  auto hi = std::upper_bound(days_.begin(), days_.end(), to);
  return {lo, hi};
}

}  // namespace dynrec
