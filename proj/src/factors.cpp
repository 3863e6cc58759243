#include "factors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "error.hpp"

namespace dynrec {

const std::array<std::string, kFactorCount>& factor_names() {
  static const std::array<std::string, kFactorCount> names = {
      "REVGH", "EPS", "ROA", "ROE",  "PE",  "PS",    "NPM",   "GPM", "OM",  "PB",
      "PCFO",  "CR",  "EM",  "EVCFO", "LTDTA", "WCR", "DE",   "QR",  "DSI", "DPO"};
  return names;
}

std::optional<Factor> factor_from_name(std::string_view name) {
  const auto& names = factor_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return Factor(i);
  return std::nullopt;
}

bool FactorVector::complete() const {
  return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

namespace {

using Opt = std::optional<double>;

Opt finite(double v) { return std::isfinite(v) ? Opt(v) : std::nullopt; }

Opt ratio(Opt num, Opt den) {
  if (!num || !den || *den == 0.0) return std::nullopt;
  return finite(*num / *den);
}

Opt mul(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return finite(*a * *b);
}

Opt sub(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return finite(*a - *b);
}

Opt add(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return finite(*a + *b);
}

}  // namespace

FactorVector compute_factors(const FundamentalRecord& rec, double price,
                             std::span<const FundamentalRecord> trailing) {
  if (!(price > 0.0) || !std::isfinite(price))
    fail(ErrorKind::kInvalidArgument, "price must be positive for " + rec.ticker);
  FactorVector fv;
  fv.ticker = rec.ticker;
  fv.quarter = rec.quarter_end;

  const Opt px = price;
  const Opt revenue = rec.get(field::kRevenue);
  const Opt ni = rec.get(field::kNetIncome);
  const Opt assets = rec.get(field::kTotalAssets);
  const Opt equity = rec.get(field::kEquity);
  const Opt cur_assets = rec.get(field::kCurrentAssets);
  const Opt cur_liab = rec.get(field::kCurrentLiabilities);
  const Opt inventory = rec.get(field::kInventory);
  const Opt cash = rec.get(field::kCash);
  const Opt lt_debt = rec.get(field::kLongTermDebt);
  const Opt cfo = rec.get(field::kOperatingCashFlow);
  const Opt shares = rec.get(field::kSharesOutstanding);
  const Opt cogs = rec.get(field::kCogs);
  const Opt payables = rec.get(field::kAccountsPayable);
  const Opt op_income = rec.get(field::kOperatingIncome);
  const Opt ebitda = rec.get(field::kEbitda);
  const Opt debt = rec.get(field::kTotalDebt);

  Opt prior_revenue;
  const Date prior_q = Quarter::containing(rec.quarter_end).next(-4).end();
  for (const auto& t : trailing)
    if (t.ticker == rec.ticker && t.quarter_end == prior_q) prior_revenue = t.get(field::kRevenue);

  const Opt market_cap = mul(px, shares);
  const Opt ev = sub(add(market_cap, debt), cash);
  const Opt eps = ratio(ni, shares);
  const Opt positive_equity = (equity && *equity > 0.0) ? equity : std::nullopt;

  auto set = [&](Factor f, Opt v) { fv.values[std::size_t(f)] = v; };
  set(Factor::kRevenueGrowth, sub(ratio(revenue, prior_revenue), Opt(1.0)));
  set(Factor::kEps, eps);
  set(Factor::kRoa, ratio(ni, assets));
  set(Factor::kRoe, ratio(ni, positive_equity));
  set(Factor::kPe, ratio(px, eps));
  set(Factor::kPs, ratio(market_cap, revenue));
  set(Factor::kNetMargin, ratio(ni, revenue));
  set(Factor::kGrossMargin, ratio(sub(revenue, cogs), revenue));
  set(Factor::kOperatingMargin, ratio(op_income, revenue));
  set(Factor::kPb, ratio(market_cap, equity));
  set(Factor::kPcfo, ratio(market_cap, cfo));
  set(Factor::kCashRatio, ratio(cash, cur_liab));
  set(Factor::kEnterpriseMultiple, ratio(ev, ebitda));
  set(Factor::kEvCfo, ratio(ev, cfo));
  set(Factor::kLtDebtToAssets, ratio(lt_debt, assets));
  set(Factor::kWorkingCapital, ratio(cur_assets, cur_liab));
  set(Factor::kDebtToEquity, ratio(debt, equity));
  set(Factor::kQuickRatio, ratio(sub(cur_assets, inventory), cur_liab));
  set(Factor::kDaysInventory, mul(ratio(inventory, cogs), Opt(kDaysPerQuarter)));
  set(Factor::kDaysPayable, mul(ratio(payables, cogs), Opt(kDaysPerQuarter)));
  return fv;
}

ReturnObservation forward_log_return(const PriceSeries& prices, Date t, int quarters,
                                     int max_gap) {
  if (quarters < 1) fail(ErrorKind::kInvalidArgument, "horizon must be at least one quarter");
  const Date t_end = add_months(t, 3 * quarters);
  auto snap = [&](Date d) {
    auto obs = prices.on_or_after(d);
    if (!obs || (obs->first - d).count() > max_gap)
      fail(ErrorKind::kData, "no price for " + prices.ticker() + " within " + std::to_string(max_gap) +
                                 " days on/after " + format_date(d));
    return *obs;
  };
  auto [d0, s0] = snap(t);
  auto [d1, s1] = snap(t_end);
  ReturnObservation out;
  out.ticker = prices.ticker();
  out.t = t;
  out.horizon = quarters;
  out.r = std::log(s1 / s0);
  out.start_snap = d0;
  out.end_snap = d1;
  return out;
}

FactorStore::FactorStore(const std::vector<FundamentalRecord>& records, const PricePanel& prices,
                         const TradingDays& trading_days, int horizon) {
  // Latest release per (ticker, quarter) that is public by that quarter's trade date.
  std::map<std::pair<std::string, int>, const FundamentalRecord*> chosen;
  for (const auto& rec : records) {
    const Quarter q = Quarter::containing(rec.quarter_end);
    auto trade = trading_days.on_or_after(lagged_trade_anchor(rec.quarter_end));
    if (!trade) continue;
    if (rec.release_date > *trade) {
      ++lookahead_dropped_;
      continue;
    }
    auto& slot = chosen[{rec.ticker, q.ordinal()}];
    if (!slot || slot->release_date < rec.release_date) slot = &rec;
  }
  for (const auto& [key, rec] : chosen) {
    FactorObservation o;
    o.ticker = rec->ticker;
    o.sector = rec->sector;
    o.quarter = Quarter::from_ordinal(key.second);
    const Date anchor = lagged_trade_anchor(rec->quarter_end);
    o.trade_date = *trading_days.on_or_after(anchor);
    o.release_date = rec->release_date;
    o.factors.ticker = rec->ticker;
    o.factors.quarter = rec->quarter_end;

    auto series = prices.find(rec->ticker);
    std::optional<std::pair<Date, double>> snap;
    if (series != prices.end()) snap = series->second.on_or_after(anchor);
    if (snap && snap->first <= o.trade_date) {
      o.price_date = snap->first;
      std::vector<FundamentalRecord> trailing;
      auto prior = chosen.find({rec->ticker, key.second - 4});
      if (prior != chosen.end()) trailing.push_back(*prior->second);
      o.factors = compute_factors(*rec, snap->second, trailing);

      const Date end_anchor = add_months(anchor, 3 * horizon);
      auto end_trade = trading_days.on_or_after(end_anchor);
      if (end_trade) {
        try {
          auto ret = forward_log_return(series->second, anchor, horizon);
          if (ret.start_snap == snap->first && ret.end_snap <= *end_trade) {
            o.fwd_return = ret.r;
            o.realization_date = ret.end_snap;
          }
        } catch (const Error&) {
          // no realized return yet, or a price gap; row remains usable for prediction only
        }
      }
    }
    obs_.emplace(key, std::move(o));
  }
}

const FactorObservation* FactorStore::find(const std::string& ticker, Quarter q) const {
  auto it = obs_.find({ticker, q.ordinal()});
  return it == obs_.end() ? nullptr : &it->second;
}

std::vector<const FactorObservation*> FactorStore::all() const {
  std::vector<const FactorObservation*> out;
  out.reserve(obs_.size());
  for (const auto& [k, o] : obs_) out.push_back(&o);
  return out;
}

SectorSlice build_sector_table(int sector, Quarter first, Quarter last, const FactorStore& store,
                               const UniverseCalendar& universe, bool require_return) {
  SectorSlice slice;
  slice.table.sector = sector;
  slice.table.factor_names.assign(factor_names().begin(), factor_names().end());
  for (Quarter q = first; q <= last; q = q.next()) {
    // Membership is taken at the quarter's trade date; uncovered dates contribute nothing.
    const Date probe = lagged_trade_anchor(q.end());
    if (!universe.covers(probe)) continue;
    for (const auto& ticker : universe.constituents_at(probe)) {
      const FactorObservation* o = store.find(ticker, q);
      if (!o || o->sector != sector || !o->price_date) continue;
      if (require_return && !o->fwd_return) continue;
      SectorTable::Row row;
      row.ticker = ticker;
      row.quarter = q.end();
      row.values.assign(o->factors.values.begin(), o->factors.values.end());
      row.tag = slice.payload.size();
      slice.payload.push_back(o);
      slice.table.rows.push_back(std::move(row));
    }
  }
  return slice;
}

FactorPanel build_panel(int sector, Quarter first, Quarter last, const FactorStore& store,
                        const UniverseCalendar& universe) {
  auto slice = build_sector_table(sector, first, last, store, universe, true);
  FactorPanel panel;
  panel.sector = sector;
  panel.factor_names = slice.table.factor_names;
  for (const auto& row : slice.table.rows) {
    if (!std::all_of(row.values.begin(), row.values.end(), [](const auto& v) { return v.has_value(); }))
      continue;
    PanelRow pr;
    pr.ticker = row.ticker;
    pr.quarter = row.quarter;
    for (const auto& v : row.values) pr.x.push_back(*v);
    pr.fwd_return = *slice.payload[row.tag]->fwd_return;
    panel.rows.push_back(std::move(pr));
  }
  if (panel.rows.empty())
    fail(ErrorKind::kData, "empty panel for sector " + std::to_string(sector) + " over " +
                               format_date(first.start()) + " .. " + format_date(last.end()));
  return panel;
}

std::string serialize_panels(const std::vector<FactorPanel>& panels) {
  const auto& names = factor_names();
  std::vector<std::string> header = {"sector", "ticker", "quarter"};
  header.insert(header.end(), names.begin(), names.end());
  header.push_back("fwd_log_return");
  std::string out = csv::join(header) + "\n";
  for (const auto& p : panels) {
    std::vector<int> col_of(kFactorCount, -1);
    for (std::size_t j = 0; j < p.factor_names.size(); ++j) {
      auto f = factor_from_name(p.factor_names[j]);
      if (f) col_of[std::size_t(*f)] = int(j);
    }
    for (const auto& r : p.rows) {
      std::vector<std::string> cells = {std::to_string(p.sector), r.ticker, format_date(r.quarter)};
      for (std::size_t k = 0; k < kFactorCount; ++k)
        cells.push_back(col_of[k] >= 0 ? csv::format_number(r.x[std::size_t(col_of[k])]) : "");
      cells.push_back(csv::format_number(r.fwd_return));
      out += csv::join(cells) + "\n";
    }
  }
  return out;
}

std::vector<FactorPanel> parse_panels(const csv::Table& table, const std::string& source) {
  std::vector<FactorPanel> out;
  if (table.header.empty()) return out;
  const auto c_sector = table.column("sector", source);
  const auto c_ticker = table.column("ticker", source);
  const auto c_quarter = table.column("quarter", source);
  const auto c_ret = table.column("fwd_log_return", source);
  std::array<std::size_t, kFactorCount> c_fac{};
  for (std::size_t k = 0; k < kFactorCount; ++k) c_fac[k] = table.column(factor_names()[k], source);

  std::map<int, std::vector<const csv::Row*>> by_sector;
  std::vector<int> order;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, source + " line " + std::to_string(row.line) + ": wrong cell count");
    int sector = std::stoi(row.cells[c_sector]);
    if (!by_sector.count(sector)) order.push_back(sector);
    by_sector[sector].push_back(&row);
  }
  for (int sector : order) {
    const auto& rows = by_sector[sector];
    FactorPanel p;
    p.sector = sector;
    std::vector<std::size_t> present;
    for (std::size_t k = 0; k < kFactorCount; ++k) {
      bool any = std::any_of(rows.begin(), rows.end(), [&](const csv::Row* r) { return !r->cells[c_fac[k]].empty(); });
      if (any) {
        present.push_back(k);
        p.factor_names.push_back(factor_names()[k]);
      }
    }
    for (const auto* r : rows) {
      PanelRow pr;
      pr.ticker = r->cells[c_ticker];
      pr.quarter = parse_date(r->cells[c_quarter]);
      for (auto k : present) {
        auto v = csv::parse_number(r->cells[c_fac[k]]);
        if (!v)
          fail(ErrorKind::kParse, source + " line " + std::to_string(r->line) + ", field '" +
                                      factor_names()[k] + "': missing or invalid value");
        pr.x.push_back(*v);
      }
      auto ret = csv::parse_number(r->cells[c_ret]);
      if (!ret)
        fail(ErrorKind::kParse, source + " line " + std::to_string(r->line) + ": invalid fwd_log_return");
      pr.fwd_return = *ret;
      p.rows.push_back(std::move(pr));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dynrec
