#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "date.hpp"
#include "ingest.hpp"

namespace dynrec {

inline constexpr double kDefaultCostRate = 0.001;
inline constexpr double kTradingDaysPerYear = 252.0;

struct Holdings {
  std::map<std::string, double> shares;
  double cash = 0.0;

  double value(const std::map<std::string, double>& prices) const;
};

struct BlotterRow {
  Date date;
  std::string ticker;
  double share_delta = 0.0;
  double price = 0.0;
  double cost = 0.0;
};

struct CurvePoint {
  Date date;
  double value = 0.0;
  double cash = 0.0;
};

using EquityCurve = std::vector<CurvePoint>;

/// Cost of one trade: |Δ|·P·rate.
double transaction_cost(double share_delta, double price, double rate = kDefaultCostRate);

struct RebalanceResult {
  Holdings holdings;
  std::vector<BlotterRow> trades;
  double cost = 0.0;
  double value_before = 0.0;
};

/// Move `holdings` to `targets` (ticker → weight) at `prices`. Names held but not targeted are sold.
/// Target shares use the value net of a first-pass cost estimate; further passes run only if cash
/// would go negative.
RebalanceResult rebalance(const Holdings& holdings, const std::map<std::string, double>& targets,
                          const std::map<std::string, double>& prices, Date date, double cost_rate = kDefaultCostRate);

struct MarkOptions {
  double cost_rate = kDefaultCostRate;
};

/// Daily valuation of a fixed book over `days`. Gaps carry the last price forward; a ticker with no
/// later observation is liquidated at its last price on its first missing day.
EquityCurve mark_to_market(Holdings& holdings, const PricePanel& prices, const std::vector<Date>& days,
                           std::vector<BlotterRow>* liquidations = nullptr, const MarkOptions& options = {});

struct PerformanceReport {
  double start_value = 0.0;
  double end_value = 0.0;
  double total_return = 0.0;
  double max_drawdown = 0.0;
  double annualized_return = 0.0;
  double annualized_std = 0.0;
  std::optional<double> sharpe;  // undefined when the std is zero
  double rf = 0.015;
  std::size_t days = 0;
};

std::optional<double> sharpe_ratio(double annualized_return, double annualized_std, double rf);
double max_drawdown(const std::vector<double>& values);
PerformanceReport metrics(const std::vector<double>& values, double rf);
PerformanceReport metrics(const EquityCurve& curve, double rf);

struct BacktestOptions {
  double initial_value = 1'000'000.0;
  double cost_rate = kDefaultCostRate;
  double rf = 0.015;
};

struct BacktestResult {
  AllocationMethod method = AllocationMethod::kEqual;
  EquityCurve curve;
  std::vector<BlotterRow> blotter;
  PerformanceReport report;
  double total_cost = 0.0;
};

/// Holds each allocation from its trade date until the next one; the curve opens on the trading day
/// before the first trade date at the initial value and runs through `end`.
BacktestResult run_backtest(const std::vector<PortfolioWeights>& schedule, const PricePanel& prices,
                            const TradingDays& axis, Date end, const BacktestOptions& options = {});

struct AccountingCheck {
  double max_daily_residual = 0.0;      // |value - (cash + Σ shares·price)|
  double max_rebalance_residual = 0.0;  // |value_after - (value_before - cost)| on trade days
  double cost_difference = 0.0;         // |total_cost - Σ blotter cost|
  double min_cash = 0.0;
};

/// Replays a result from its blotter and the price panel, independently of the simulator state.
AccountingCheck verify_accounting(const BacktestResult& result, const PricePanel& prices, double initial_value);

/// date,method,value
std::string serialize_curves(const std::vector<BacktestResult>& runs);
/// date,method,ticker,share_delta,price,cost
std::string serialize_blotters(const std::vector<BacktestResult>& runs);

}  // namespace dynrec
