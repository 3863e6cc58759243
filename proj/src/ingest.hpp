#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csv.hpp"
#include "date.hpp"

namespace dynrec {

inline constexpr std::array<int, 11> kGicsSectors = {10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
bool is_gics_sector(int code);

/// Raw accounting columns consumed by the factor formulas.
namespace field {
inline constexpr const char* kRevenue = "revenue";
inline constexpr const char* kNetIncome = "net_income";
inline constexpr const char* kTotalAssets = "total_assets";
inline constexpr const char* kEquity = "total_equity";
inline constexpr const char* kCurrentAssets = "current_assets";
inline constexpr const char* kCurrentLiabilities = "current_liabilities";
inline constexpr const char* kInventory = "inventory";
inline constexpr const char* kCash = "cash";
inline constexpr const char* kLongTermDebt = "long_term_debt";
inline constexpr const char* kOperatingCashFlow = "operating_cash_flow";
inline constexpr const char* kSharesOutstanding = "shares_outstanding";
inline constexpr const char* kCogs = "cogs";
inline constexpr const char* kAccountsPayable = "accounts_payable";
inline constexpr const char* kOperatingIncome = "operating_income";
inline constexpr const char* kEbitda = "ebitda";
inline constexpr const char* kTotalDebt = "total_debt";
inline constexpr const char* kDividends = "dividends";
}  // namespace field

const std::vector<std::string>& raw_field_names();

struct FundamentalRecord {
  std::string ticker;
  int sector = 0;
  Date quarter_end{};
  Date release_date{};
  std::map<std::string, std::optional<double>> fields;

  std::optional<double> get(const std::string& name) const;
  friend bool operator==(const FundamentalRecord&, const FundamentalRecord&) = default;
};

std::vector<FundamentalRecord> load_fundamentals(const std::filesystem::path& path);
std::vector<FundamentalRecord> parse_fundamentals(const csv::Table& table,
                                                  const std::string& source = "fundamentals.csv");
/// Columns: ticker,sector,quarter_end,release_date then `field_names` (all fields seen when empty).
std::string serialize_fundamentals(const std::vector<FundamentalRecord>& records,
                                   std::vector<std::string> field_names = {});

/// Keeps records with release_date <= trade_date, preserving order.
std::vector<FundamentalRecord> filter_lookahead(const std::vector<FundamentalRecord>& records,
                                                Date trade_date);

class PriceSeries {
 public:
  PriceSeries() = default;
  PriceSeries(std::string ticker, std::vector<std::pair<Date, double>> observations);

  const std::string& ticker() const { return ticker_; }
  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<double>& closes() const { return closes_; }
  bool empty() const { return dates_.empty(); }
  std::size_t size() const { return dates_.size(); }

  /// First observation on or after `d`.
  std::optional<std::pair<Date, double>> on_or_after(Date d) const;
  /// Last observation on or before `d`.
  std::optional<std::pair<Date, double>> on_or_before(Date d) const;
  std::optional<double> on(Date d) const;

 private:
  std::string ticker_;
  std::vector<Date> dates_;
  std::vector<double> closes_;
};

using PricePanel = std::map<std::string, PriceSeries>;

PricePanel load_prices(const std::filesystem::path& path);
PricePanel parse_prices(const csv::Table& table, const std::string& source = "prices.csv");
std::string serialize_prices(const PricePanel& panel);
/// Union of all observation dates.
TradingDays observed_trading_days(const PricePanel& panel);

class UniverseCalendar {
 public:
  void add(Date quarter_start, const std::string& ticker);
  /// Constituents of the quarter containing `d` (quarter bounds inclusive).
  const std::set<std::string>& constituents_at(Date d) const;
  bool covers(Date d) const;
  const std::map<Date, std::set<std::string>>& quarters() const { return by_quarter_; }
  std::set<std::string> all_tickers() const;
  /// Throws when a listed ticker has no price series.
  void validate_against(const PricePanel& prices) const;

 private:
  std::map<Date, std::set<std::string>> by_quarter_;
};

UniverseCalendar load_universe(const std::filesystem::path& path);
UniverseCalendar parse_universe(const csv::Table& table, const std::string& source = "universe.csv");

/// Per-sector factor table with optional cells, the input of the missing-data rules.
struct SectorTable {
  struct Row {
    std::string ticker;
    Date quarter{};
    std::vector<std::optional<double>> values;
    std::size_t tag = 0;  // caller payload index, carried through cleaning
  };
  int sector = 0;
  std::vector<std::string> factor_names;
  std::vector<Row> rows;

  std::size_t missing_cells() const;
};

struct CleaningRules {
  double factor_missing_max = 0.05;  // drop a factor above this fraction
  double sector_missing_max = 0.07;  // drop worst stocks while above this fraction
};

struct CleaningReport {
  struct FactorRemoval {
    std::string factor;
    double missing_fraction = 0.0;
  };
  struct StockRemoval {
    std::string ticker;
    std::size_t missing_cells = 0;
  };
  struct RowRemoval {
    std::string ticker;
    Date quarter{};
  };
  std::vector<StockRemoval> stocks;
  std::vector<FactorRemoval> factors;
  std::vector<RowRemoval> rows;
};

struct CleanResult {
  SectorTable table;
  CleaningReport report;
};

/// Worst-stock removal while sector missingness exceeds the limit, then factor removal,
/// then row deletion. Throws Error(kData) if no stock survives.
CleanResult clean_missing(const SectorTable& table, const CleaningRules& rules = {});
/// Applies a report's removals in order; reproduces clean_missing's output.
SectorTable replay_cleaning(const SectorTable& table, const CleaningReport& report);

}  // namespace dynrec
