#include "backtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csv.hpp"
#include "error.hpp"
#include "log.hpp"

namespace dynrec {

double Holdings::value(const std::map<std::string, double>& prices) const {
  double v = cash;
  for (const auto& [t, s] : shares) {
    if (s == 0.0) continue;
    auto it = prices.find(t);
    if (it == prices.end()) fail(ErrorKind::kData, "no price for held ticker " + t);
    v += s * it->second;
  }
  return v;
}

double transaction_cost(double share_delta, double price, double rate) { return std::abs(share_delta) * price * rate; }

namespace {

const double& price_of(const std::map<std::string, double>& prices, const std::string& t, Date date) {
  auto it = prices.find(t);
  if (it == prices.end() || !(it->second > 0.0) || !std::isfinite(it->second))
    fail(ErrorKind::kData, "rebalance on " + format_date(date) + ": missing price for " + t);
  return it->second;
}

}  // namespace

RebalanceResult rebalance(const Holdings& holdings, const std::map<std::string, double>& targets,
                          const std::map<std::string, double>& prices, Date date, double rate) {
  if (!(rate >= 0.0 && rate < 0.5)) fail(ErrorKind::kInvalidArgument, "cost rate must be in [0, 0.5)");
  for (const auto& [t, w] : targets)
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::kInvalidArgument, "negative or non-finite weight for " + t);

  std::map<std::string, double> universe;  // ticker -> price, over held ∪ targeted
  for (const auto& [t, s] : holdings.shares)
    if (s != 0.0) universe[t] = price_of(prices, t, date);
  for (const auto& [t, w] : targets) universe[t] = price_of(prices, t, date);

  RebalanceResult out;
  out.value_before = holdings.value(universe);
  const double value = out.value_before;

  auto held = [&](const std::string& t) {
    auto it = holdings.shares.find(t);
    return it == holdings.shares.end() ? 0.0 : it->second;
  };
  auto shares_for = [&](double base) {
    std::map<std::string, double> s;
    for (const auto& [t, p] : universe) {
      auto it = targets.find(t);
      double x = it == targets.end() ? 0.0 : it->second * base / p;
      const double h = held(t);
      if (std::abs(x - h) <= 1e-10 * std::abs(h)) x = h;  // unchanged position, not a trade
      s[t] = x;
    }
    return s;
  };
  auto cost_of = [&](const std::map<std::string, double>& s) {
    double c = 0.0;
    for (const auto& [t, x] : s) c += transaction_cost(x - held(t), universe[t], rate);
    return c;
  };
  auto invested = [&](const std::map<std::string, double>& s) {
    double v = 0.0;
    for (const auto& [t, x] : s) v += x * universe[t];
    return v;
  };

  auto first = shares_for(value);
  double base = value - cost_of(first);
  auto shares = shares_for(base);
  double cost = cost_of(shares);
  double cash = value - invested(shares) - cost;
  for (int pass = 0; cash < 0.0 && pass < 64; ++pass) {
    base -= -cash * (1.0 + 2.0 * rate) + 1e-12 * value;
    shares = shares_for(base);
    cost = cost_of(shares);
    cash = value - invested(shares) - cost;
  }
  if (cash < 0.0) fail(ErrorKind::kNumerical, "rebalance on " + format_date(date) + ": cash stays negative");

  for (const auto& [t, x] : shares) {
    const double d = x - held(t);
    if (d != 0.0) out.trades.push_back({date, t, d, universe[t], transaction_cost(d, universe[t], rate)});
    if (x != 0.0) out.holdings.shares[t] = x;
  }
  out.holdings.cash = cash;
  out.cost = cost;
  return out;
}

EquityCurve mark_to_market(Holdings& holdings, const PricePanel& prices, const std::vector<Date>& days,
                           std::vector<BlotterRow>* liquidations, const MarkOptions& opt) {
  EquityCurve curve;
  for (Date d : days) {
    double v = holdings.cash;
    std::vector<std::string> gone;
    for (const auto& [t, s] : holdings.shares) {
      auto it = prices.find(t);
      if (it == prices.end() || it->second.empty()) fail(ErrorKind::kData, "mark_to_market: no prices for " + t);
      const auto& series = it->second;
      auto last = series.on_or_before(d);
      if (!last) fail(ErrorKind::kData, "mark_to_market: no price for " + t + " on or before " + format_date(d));
      if (last->first != d) {
        if (series.dates().back() < d) {
          gone.push_back(t);
          continue;
        }
        logger()->debug("{}: no price for {}, carrying {} forward", format_date(d), t, format_date(last->first));
      }
      v += s * last->second;
    }
    for (const auto& t : gone) {
      const double s = holdings.shares[t];
      const auto last = *prices.at(t).on_or_before(d);
      const double cost = transaction_cost(s, last.second, opt.cost_rate);
      logger()->info("{}: {} has no further prices, liquidating {} shares at {} ({})", format_date(d), t, s,
                     last.second, format_date(last.first));
      holdings.cash += s * last.second - cost;
      v += s * last.second - cost;
      holdings.shares.erase(t);
      if (liquidations) liquidations->push_back({d, t, -s, last.second, cost});
    }
    curve.push_back({d, v, holdings.cash});
  }
  return curve;
}

std::optional<double> sharpe_ratio(double annualized_return, double annualized_std, double rf) {
  if (!(annualized_std > 0.0)) return std::nullopt;
  return (annualized_return - rf) / annualized_std;
}

double max_drawdown(const std::vector<double>& values) {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (double v : values) {
    peak = std::max(peak, v);
    worst = std::min(worst, v / peak - 1.0);
  }
  return worst;
}

PerformanceReport metrics(const std::vector<double>& values, double rf) {
  if (values.size() < 2) fail(ErrorKind::kInvalidArgument, "metrics: curve needs at least two points");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::kData, "metrics: curve values must be positive");
  PerformanceReport r;
  r.rf = rf;
  r.days = values.size();
  r.start_value = values.front();
  r.end_value = values.back();
  r.total_return = r.end_value / r.start_value - 1.0;
  r.max_drawdown = max_drawdown(values);
  std::vector<double> ret;
  for (std::size_t i = 1; i < values.size(); ++i) ret.push_back(values[i] / values[i - 1] - 1.0);
  const double mean = std::accumulate(ret.begin(), ret.end(), 0.0) / double(ret.size());
  double ss = 0.0;
  for (double x : ret) ss += (x - mean) * (x - mean);
  const double sd = ret.size() > 1 ? std::sqrt(ss / double(ret.size() - 1)) : 0.0;
  r.annualized_return = mean * kTradingDaysPerYear;
  r.annualized_std = sd * std::sqrt(kTradingDaysPerYear);
  r.sharpe = sharpe_ratio(r.annualized_return, r.annualized_std, rf);
  return r;
}

PerformanceReport metrics(const EquityCurve& curve, double rf) {
  std::vector<double> v;
  for (const auto& p : curve) v.push_back(p.value);
  return metrics(v, rf);
}

BacktestResult run_backtest(const std::vector<PortfolioWeights>& schedule, const PricePanel& prices,
                            const TradingDays& axis, Date end, const BacktestOptions& opt) {
  if (schedule.empty()) fail(ErrorKind::kData, "run_backtest: no allocations to trade");
  if (!(opt.initial_value > 0.0)) fail(ErrorKind::kInvalidArgument, "initial value must be positive");
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (!(schedule[k - 1].trade_date < schedule[k].trade_date))
      fail(ErrorKind::kInvalidArgument, "run_backtest: trade dates must be strictly increasing");
  BacktestResult out;
  out.method = schedule.front().method;

  const Date first = schedule.front().trade_date;
  auto opening = axis.on_or_before(first - std::chrono::days{1});
  Holdings book;
  book.cash = opt.initial_value;
  out.curve.push_back({opening.value_or(first - std::chrono::days{1}), opt.initial_value, opt.initial_value});

  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto& pw = schedule[k];
    const Date d = pw.trade_date;
    if (d > end) break;
    const Date stop = k + 1 < schedule.size() ? schedule[k + 1].trade_date - std::chrono::days{1} : end;
    try {
      // Liquidate anything that has stopped trading, then trade at the day's (carried) prices.
      std::vector<BlotterRow> gone;
      mark_to_market(book, prices, {d}, &gone, {opt.cost_rate});
      for (auto& g : gone) out.total_cost += g.cost;
      out.blotter.insert(out.blotter.end(), gone.begin(), gone.end());

      std::map<std::string, double> px;
      auto quote = [&](const std::string& t) {
        auto it = prices.find(t);
        auto p = it == prices.end() ? std::nullopt : it->second.on_or_before(d);
        if (!p) fail(ErrorKind::kData, "no price for " + t + " on or before " + format_date(d));
        px[t] = p->second;
      };
      for (const auto& [t, s] : book.shares) quote(t);
      std::map<std::string, double> targets;
      for (std::size_t i = 0; i < pw.tickers.size(); ++i) {
        quote(pw.tickers[i]);
        targets[pw.tickers[i]] += pw.weights[i];
      }
      auto rb = rebalance(book, targets, px, d, opt.cost_rate);
      book = rb.holdings;
      out.total_cost += rb.cost;
      out.blotter.insert(out.blotter.end(), rb.trades.begin(), rb.trades.end());
      out.curve.push_back({d, book.value(px), book.cash});

      auto days = axis.between(d + std::chrono::days{1}, stop);
      std::vector<BlotterRow> liq;
      auto seg = mark_to_market(book, prices, days, &liq, {opt.cost_rate});
      for (auto& g : liq) out.total_cost += g.cost;
      out.blotter.insert(out.blotter.end(), liq.begin(), liq.end());
      out.curve.insert(out.curve.end(), seg.begin(), seg.end());
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(method_name(pw.method)) + " event " + std::to_string(k) + " (" +
                                format_date(d) + "): " + e.what());
    }
  }
  out.report = metrics(out.curve, opt.rf);
  return out;
}

AccountingCheck verify_accounting(const BacktestResult& r, const PricePanel& prices, double initial_value) {
  AccountingCheck out;
  std::map<std::string, double> shares;
  double cash = initial_value;
  double cost_sum = 0.0;
  std::size_t b = 0;
  auto price = [&](const std::string& t, Date d) {
    auto p = prices.at(t).on_or_before(d);
    if (!p) fail(ErrorKind::kData, "verify_accounting: no price for " + t);
    return p->second;
  };
  out.min_cash = cash;
  for (std::size_t k = 0; k < r.curve.size(); ++k) {
    const auto& pt = r.curve[k];
    double before = cash;
    for (const auto& [t, s] : shares) before += s * price(t, pt.date);
    double day_cost = 0.0;
    bool traded = false;
    for (; b < r.blotter.size() && r.blotter[b].date <= pt.date; ++b) {
      const auto& row = r.blotter[b];
      shares[row.ticker] += row.share_delta;
      if (std::abs(shares[row.ticker]) <= 1e-9 * std::abs(row.share_delta)) shares.erase(row.ticker);
      cash -= row.share_delta * row.price + row.cost;
      day_cost += row.cost;
      cost_sum += row.cost;
      traded = true;
    }
    double value = cash;
    for (const auto& [t, s] : shares) value += s * price(t, pt.date);
    out.max_daily_residual = std::max(out.max_daily_residual, std::abs(pt.value - value));
    out.max_daily_residual = std::max(out.max_daily_residual, std::abs(pt.cash - cash));
    if (traded && k > 0) out.max_rebalance_residual = std::max(out.max_rebalance_residual, std::abs(pt.value - (before - day_cost)));
    out.min_cash = std::min(out.min_cash, cash);
  }
  out.cost_difference = std::abs(r.total_cost - cost_sum);
  return out;
}

std::string serialize_curves(const std::vector<BacktestResult>& runs) {
  std::string s = "date,method,value\n";
  for (const auto& r : runs)
    for (const auto& p : r.curve)
      s += csv::join({format_date(p.date), std::string(method_name(r.method)), csv::format_number(p.value)}) + "\n";
  return s;
}

std::string serialize_blotters(const std::vector<BacktestResult>& runs) {
  std::string s = "date,method,ticker,share_delta,price,cost\n";
  for (const auto& r : runs)
    for (const auto& b : r.blotter)
      s += csv::join({format_date(b.date), std::string(method_name(r.method)), b.ticker,
                      csv::format_number(b.share_delta), csv::format_number(b.price), csv::format_number(b.cost)}) +
           "\n";
  return s;
}

}  // namespace dynrec
