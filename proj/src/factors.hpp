#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "date.hpp"
#include "ingest.hpp"

namespace dynrec {

/// The twenty fundamental indicators, in column order.
enum class Factor : std::size_t {
  kRevenueGrowth,   // REVGH  revenue_T / revenue_{T-4} - 1
  kEps,             // EPS    net_income / shares
  kRoa,             // ROA    net_income / total_assets
  kRoe,             // ROE    net_income / equity, missing when equity <= 0
  kPe,              // PE     price / EPS
  kPs,              // PS     price * shares / revenue
  kNetMargin,       // NPM    net_income / revenue
  kGrossMargin,     // GPM    (revenue - cogs) / revenue
  kOperatingMargin, // OM     operating_income / revenue
  kPb,              // PB     price * shares / equity
  kPcfo,            // PCFO   price * shares / operating_cash_flow
  kCashRatio,       // CR     cash / current_liabilities
  kEnterpriseMultiple,  // EM  EV / ebitda, EV = price*shares + total_debt - cash
  kEvCfo,           // EVCFO  EV / operating_cash_flow
  kLtDebtToAssets,  // LTDTA  long_term_debt / total_assets
  kWorkingCapital,  // WCR    current_assets / current_liabilities
  kDebtToEquity,    // DE     total_debt / equity
  kQuickRatio,      // QR     (current_assets - inventory) / current_liabilities
  kDaysInventory,   // DSI    inventory / cogs * 91.25
  kDaysPayable,     // DPO    accounts_payable / cogs * 91.25
};

inline constexpr std::size_t kFactorCount = 20;
inline constexpr double kDaysPerQuarter = 365.0 / 4.0;

const std::array<std::string, kFactorCount>& factor_names();
std::optional<Factor> factor_from_name(std::string_view name);

struct FactorVector {
  std::string ticker;
  Date quarter{};
  std::array<std::optional<double>, kFactorCount> values{};

  std::optional<double> operator[](Factor f) const { return values[std::size_t(f)]; }
  bool complete() const;
};

/// `price` is the trade-date snap price; `trailing` holds the ticker's earlier records
/// (only the same quarter one year back is used). Zero denominators, missing inputs and
/// non-finite results leave the indicator empty.
FactorVector compute_factors(const FundamentalRecord& record, double price,
                             std::span<const FundamentalRecord> trailing);

struct ReturnObservation {
  std::string ticker;
  Date t{};
  int horizon = 1;
  double r = 0.0;
  Date start_snap{};
  Date end_snap{};  // realization date
};

inline constexpr int kMaxSnapGapDays = 7;

/// ln(S_{T+f} / S_T), each price the first observation on or after its date
/// (T + f is T shifted by 3f months). Throws Error(kData) naming the gap.
ReturnObservation forward_log_return(const PriceSeries& prices, Date t, int quarters = 1,
                                     int max_snap_gap_days = kMaxSnapGapDays);

/// One (ticker, quarter) observation with everything needed to place it in a panel.
struct FactorObservation {
  std::string ticker;
  int sector = 0;
  Quarter quarter{};
  Date trade_date{};      // first trading day on/after the lagged anchor of this quarter
  Date release_date{};
  std::optional<Date> price_date;
  FactorVector factors;
  std::optional<double> fwd_return;
  std::optional<Date> realization_date;
};

/// Point-in-time factor observations keyed by (ticker, quarter). Records released after a
/// quarter's trade date are ignored; snap prices must fall on or before the relevant trade
/// date so nothing is visible before it is knowable.
class FactorStore {
 public:
  FactorStore(const std::vector<FundamentalRecord>& records, const PricePanel& prices,
              const TradingDays& trading_days, int horizon = 1);

  const FactorObservation* find(const std::string& ticker, Quarter q) const;
  std::vector<const FactorObservation*> all() const;
  std::size_t size() const { return obs_.size(); }
  std::size_t lookahead_dropped() const { return lookahead_dropped_; }

 private:
  std::map<std::pair<std::string, int>, FactorObservation> obs_;
  std::size_t lookahead_dropped_ = 0;
};

struct PanelRow {
  std::string ticker;
  Date quarter{};
  std::vector<double> x;
  double fwd_return = 0.0;
};

struct FactorPanel {
  int sector = 0;
  std::vector<std::string> factor_names;
  std::vector<PanelRow> rows;
};

/// Raw table of constituents of `sector` over [first, last]; rows carry store pointers as tags
/// into `payload`. With `require_return`, rows lacking a forward return are omitted.
struct SectorSlice {
  SectorTable table;
  std::vector<const FactorObservation*> payload;
};
SectorSlice build_sector_table(int sector, Quarter first, Quarter last, const FactorStore& store,
                               const UniverseCalendar& universe, bool require_return);

/// Rows for constituents with all twenty factors and a forward return. Throws on empty panel.
FactorPanel build_panel(int sector, Quarter first, Quarter last, const FactorStore& store,
                        const UniverseCalendar& universe);

std::string serialize_panels(const std::vector<FactorPanel>& panels);
std::vector<FactorPanel> parse_panels(const csv::Table& table, const std::string& source = "panel.csv");

}  // namespace dynrec
