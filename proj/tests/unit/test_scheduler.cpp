#include <doctest.h>

#include "error.hpp"
#include "scheduler.hpp"

using namespace dynrec;

namespace {

TradingDays weekdays_2000s() { return TradingDays::weekdays(make_date(1999, 1, 1), make_date(2016, 12, 31)); }

}  // namespace

TEST_CASE("trade dates follow the two month lag") {
  // 2000Q1 start; 21 quarters brings the first event to 2005Q1.
  auto cal = build_calendar(make_date(2000, 1, 1), make_date(2012, 12, 31), weekdays_2000s());
  REQUIRE(!cal.events.empty());
  for (const auto& e : cal.events) {
    const Date anchor = lagged_trade_anchor(e.fiscal_quarter_end);
    CHECK(e.trade_date >= anchor);
    CHECK((e.trade_date - anchor).count() <= 3);
    CHECK(is_weekday(e.trade_date));
    const unsigned m = month_of(e.trade_date);
    CHECK((m == 3 || m == 6 || m == 9 || m == 12));
  }
  SUBCASE("June quarter trades on 09/01") {
    bool seen = false;
    for (const auto& e : cal.events)
      if (e.fiscal_quarter_end == make_date(2010, 6, 30)) {
        CHECK(e.trade_date == make_date(2010, 9, 1));
        seen = true;
      }
    CHECK(seen);
  }
  SUBCASE("December quarter trades on the first trading day from 03/01") {
    for (const auto& e : cal.events)
      if (e.fiscal_quarter_end == make_date(2006, 12, 31)) CHECK(e.trade_date == make_date(2007, 3, 1));
  }
  SUBCASE("Saturday anchor moves to Monday") {
    // 2007-09-01 is a Saturday.
    for (const auto& e : cal.events)
      if (e.fiscal_quarter_end == make_date(2007, 6, 30)) CHECK(e.trade_date == make_date(2007, 9, 3));
  }
}

TEST_CASE("holidays push the trade date") {
  auto days = TradingDays::weekdays(make_date(1999, 1, 1), make_date(2016, 12, 31), {make_date(2010, 9, 1)});
  auto cal = build_calendar(make_date(2000, 1, 1), make_date(2012, 12, 31), days);
  for (const auto& e : cal.events)
    if (e.fiscal_quarter_end == make_date(2010, 6, 30)) CHECK(e.trade_date == make_date(2010, 9, 2));
}

TEST_CASE("expanding then sliding windows") {
  const Quarter first{2000, 1};
  SUBCASE("first twenty quarters emit nothing") {
    for (int k = 1; k <= 20; ++k) CHECK_FALSE(split_for_quarter(k, first));
  }
  SUBCASE("quarter 21 trains on 1-16 and tests on 17-20") {
    auto s = split_for_quarter(21, first);
    REQUIRE(s);
    REQUIRE(s->training.size() == 16);
    CHECK(s->training.front() == first);
    CHECK(s->training.back() == first.next(15));
    REQUIRE(s->test.size() == 4);
    CHECK(s->test.front() == first.next(16));
    CHECK(s->test.back() == first.next(19));
  }
  SUBCASE("quarter 50 slides a 40 quarter window") {
    auto s = split_for_quarter(50, first);
    REQUIRE(s);
    REQUIRE(s->training.size() == 40);
    CHECK(s->training.front() == first.next(5));
    CHECK(s->training.back() == first.next(44));
    CHECK(s->test.front() == first.next(45));
    CHECK(s->test.back() == first.next(48));
  }
  SUBCASE("the window grows by one per quarter until the cap") {
    for (int k = 21; k <= 60; ++k) {
      auto s = split_for_quarter(k, first);
      REQUIRE(s);
      CHECK(int(s->training.size()) == std::min(40, k - 5));
    }
  }
}

TEST_CASE("calendar invariants") {
  auto cal = build_calendar(make_date(2000, 1, 1), make_date(2016, 6, 30), weekdays_2000s());
  CHECK(cal.events.front().data_quarter == 21);
  CHECK(cal.events.front().fiscal_quarter_end == make_date(2005, 3, 31));
  for (std::size_t i = 0; i < cal.events.size(); ++i) {
    const auto& e = cal.events[i];
    CHECK(e.index == int(i));
    CHECK(e.test_quarters.size() == 4);
    CHECK(e.training_quarters.size() >= 16);
    CHECK(e.training_quarters.size() <= 40);
    CHECK(e.training_quarters.back().next() == e.test_quarters.front());
    CHECK(e.test_quarters.back().next() == e.quarter);
    // The last test quarter's return is realized by this trade date.
    CHECK(lagged_trade_anchor(e.test_quarters.back().end()) < e.trade_date);
    CHECK(add_months(lagged_trade_anchor(e.test_quarters.back().end()), 3) <= e.trade_date);
    if (i > 0) {
      CHECK(e.trade_date > cal.events[i - 1].trade_date);
      CHECK(e.test_quarters.front() == cal.events[i - 1].test_quarters.front().next());
    }
    auto s = split(i, cal);
    CHECK(s.training == e.training_quarters);
  }
  CHECK_THROWS_AS(split(cal.events.size(), cal), Error);
}

TEST_CASE("calendar is a pure function of its inputs") {
  auto a = build_calendar(make_date(2000, 1, 1), make_date(2012, 12, 31), weekdays_2000s());
  auto b = build_calendar(make_date(2000, 1, 1), make_date(2012, 12, 31), weekdays_2000s());
  CHECK(serialize_calendar(a) == serialize_calendar(b));
  auto text = serialize_calendar(a);
  CHECK(text.rfind("event_index,quarter_end,trade_date,train_start,train_end,test_start,test_end\n", 0) == 0);
  CHECK(text.find("\n0,2005-03-31,2005-06-01,2000-01-01,2003-12-31,2004-01-01,2004-12-31\n") != std::string::npos);
}

TEST_CASE("short spans and bad policies are rejected") {
  CHECK_THROWS_WITH_AS(build_calendar(make_date(2000, 1, 1), make_date(2004, 12, 31), weekdays_2000s()),
                       doctest::Contains("at least 21"), Error);
  CHECK_THROWS_AS(validate(WindowPolicy{20, 16, 4}), Error);
  CHECK_THROWS_AS(validate(WindowPolicy{16, 40, 0}), Error);
  // Exactly 21 quarters with the trade date inside the data range gives one event.
  auto cal = build_calendar(make_date(2000, 1, 1), make_date(2005, 6, 30), weekdays_2000s());
  CHECK(cal.events.size() == 1);
}
