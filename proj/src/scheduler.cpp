#include "scheduler.hpp"

#include "csv.hpp"
#include "error.hpp"
#include "log.hpp"

namespace dynrec {

void validate(const WindowPolicy& p) {
  if (p.min_train < 1) fail(ErrorKind::kInvalidArgument, "min training window must be at least 1 quarter");
  if (p.max_train < p.min_train)
    fail(ErrorKind::kInvalidArgument, "max training window (" + std::to_string(p.max_train) +
                                          ") is smaller than min training window (" + std::to_string(p.min_train) + ")");
  if (p.test < 1) fail(ErrorKind::kInvalidArgument, "test window must be at least 1 quarter");
}

std::optional<Split> split_for_quarter(int k, Quarter first, const WindowPolicy& p) {
  const int test_first = k - p.test;
  const int train_last = test_first - 1;
  const int available = train_last;  // quarters 1..train_last
  if (available < p.min_train) {
    logger()->info("quarter {} skipped: {} training quarters available, {} required", k, std::max(available, 0),
                   p.min_train);
    return std::nullopt;
  }
  const int train_first = std::max(1, train_last - p.max_train + 1);
  Split s;
  for (int q = train_first; q <= train_last; ++q) s.training.push_back(first.next(q - 1));
  for (int q = test_first; q < k; ++q) s.test.push_back(first.next(q - 1));
  return s;
}

TradeCalendar build_calendar(Date data_start, Date data_end, const TradingDays& trading_days,
                             const WindowPolicy& policy) {
  validate(policy);
  if (data_end < data_start) fail(ErrorKind::kInvalidArgument, "data end precedes data start");
  TradeCalendar cal;
  cal.first_quarter = Quarter::containing(data_start);
  int span = 0;
  while (cal.first_quarter.next(span).end() <= data_end) ++span;
  cal.span_quarters = span;
  const int required = policy.min_train + policy.test + 1;
  if (span < required)
    fail(ErrorKind::kData, "data span covers " + std::to_string(span) + " quarters; at least " +
                               std::to_string(required) + " are required (" + std::to_string(policy.min_train) +
                               " train + " + std::to_string(policy.test) + " test + 1 trade)");
  for (int k = required; k <= span; ++k) {
    const Quarter q = cal.first_quarter.next(k - 1);
    auto trade = trading_days.on_or_after(lagged_trade_anchor(q.end()));
    if (!trade || *trade > data_end) continue;
    auto s = split_for_quarter(k, cal.first_quarter, policy);
    if (!s) continue;
    RebalanceEvent e;
    e.index = int(cal.events.size());
    e.data_quarter = k;
    e.quarter = q;
    e.fiscal_quarter_end = q.end();
    e.trade_date = *trade;
    e.training_quarters = std::move(s->training);
    e.test_quarters = std::move(s->test);
    cal.events.push_back(std::move(e));
  }
  return cal;
}

Split split(std::size_t event_index, const TradeCalendar& calendar) {
  if (event_index >= calendar.events.size())
    fail(ErrorKind::kInvalidArgument, "event index " + std::to_string(event_index) + " out of range (" +
                                          std::to_string(calendar.events.size()) + " events)");
  const auto& e = calendar.events[event_index];
  return Split{e.training_quarters, e.test_quarters};
}

std::string serialize_calendar(const TradeCalendar& cal) {
  std::string out = "event_index,quarter_end,trade_date,train_start,train_end,test_start,test_end\n";
  for (const auto& e : cal.events) {
    out += csv::join({std::to_string(e.index), format_date(e.fiscal_quarter_end), format_date(e.trade_date),
                      format_date(e.training_quarters.front().start()), format_date(e.training_quarters.back().end()),
                      format_date(e.test_quarters.front().start()), format_date(e.test_quarters.back().end())}) +
           "\n";
  }
  return out;
}

}  // namespace dynrec
