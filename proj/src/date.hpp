#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynrec {

/// Calendar date without time zone.
using Date = std::chrono::sys_days;

Date make_date(int y, unsigned m, unsigned d);
Date parse_date(std::string_view iso);            // YYYY-MM-DD, throws Error(kParse)
std::optional<Date> try_parse_date(std::string_view iso);
std::string format_date(Date d);

int year_of(Date d);
unsigned month_of(Date d);
unsigned day_of(Date d);

Date add_months(Date d, int months);  // day clamped to month end

/// Calendar quarter identified by year and 1..4.
struct Quarter {
  int year = 0;
  int q = 1;

  Date start() const;
  Date end() const;
  Quarter next(int n = 1) const;
  /// Linear index (year*4 + q-1) for arithmetic.
  int ordinal() const { return year * 4 + (q - 1); }
  static Quarter from_ordinal(int ord);
  static Quarter containing(Date d);

  friend auto operator<=>(const Quarter&, const Quarter&) = default;
};

bool is_quarter_end(Date d);
bool is_quarter_start(Date d);

/// First day two months past the end of the quarter (06/30 -> 09/01).
Date lagged_trade_anchor(Date quarter_end);

bool is_weekday(Date d);

/// Sorted trading-day set with on/after lookups.
class TradingDays {
 public:
  TradingDays() = default;
  explicit TradingDays(std::vector<Date> days);  // sorted + deduplicated

  /// Mon-Fri between first and last inclusive, minus holidays.
  static TradingDays weekdays(Date first, Date last, const std::vector<Date>& holidays = {});

  std::optional<Date> on_or_after(Date d) const;
  std::optional<Date> on_or_before(Date d) const;
  bool contains(Date d) const;
  bool empty() const { return days_.empty(); }
  Date front() const { return days_.front(); }
  Date back() const { return days_.back(); }
  const std::vector<Date>& days() const { return days_; }
  /// Days in [from, to] inclusive.
  std::vector<Date> between(Date from, Date to) const;

 private:
  std::vector<Date> days_;
};

}  // namespace dynrec
