#pragma once

#include <optional>
#include <string>
#include <vector>

#include "date.hpp"

namespace dynrec {

struct WindowPolicy {
  int min_train = 16;
  int max_train = 40;
  int test = 4;
};

struct RebalanceEvent {
  int index = 0;
  int data_quarter = 0;  // 1-based position of the fiscal quarter in the data span
  Quarter quarter{};
  Date fiscal_quarter_end{};
  Date trade_date{};
  std::vector<Quarter> training_quarters;
  std::vector<Quarter> test_quarters;
};

struct TradeCalendar {
  Quarter first_quarter{};
  int span_quarters = 0;
  std::vector<RebalanceEvent> events;
};

struct Split {
  std::vector<Quarter> training;
  std::vector<Quarter> test;
};

/// Train/test quarters for the fiscal quarter at 1-based `data_quarter`: the `test` quarters
/// just before it, preceded by up to max_train (at least min_train) training quarters.
/// nullopt (with a logged reason) when too little history exists.
std::optional<Split> split_for_quarter(int data_quarter, Quarter first_quarter, const WindowPolicy& policy = {});

/// One event per fiscal quarter with enough history; trade date = first trading day on/after
/// the quarter end plus the two-month reporting lag. Throws if the span is too short.
TradeCalendar build_calendar(Date data_start, Date data_end, const TradingDays& trading_days,
                             const WindowPolicy& policy = {});

Split split(std::size_t event_index, const TradeCalendar& calendar);

void validate(const WindowPolicy& policy);

/// event_index,quarter_end,trade_date,train_start,train_end,test_start,test_end
std::string serialize_calendar(const TradeCalendar& calendar);

}  // namespace dynrec
