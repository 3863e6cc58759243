#include "ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace dynrec {

bool is_gics_sector(int code) {
  return std::find(kGicsSectors.begin(), kGicsSectors.end(), code) != kGicsSectors.end();
}

const std::vector<std::string>& raw_field_names() {
  static const std::vector<std::string> names = {
      field::kRevenue,          field::kNetIncome,         field::kTotalAssets,
      field::kEquity,           field::kCurrentAssets,     field::kCurrentLiabilities,
      field::kInventory,        field::kCash,              field::kLongTermDebt,
      field::kOperatingCashFlow, field::kSharesOutstanding, field::kCogs,
      field::kAccountsPayable,  field::kOperatingIncome,   field::kEbitda,
      field::kTotalDebt,        field::kDividends};
  return names;
}

std::optional<double> FundamentalRecord::get(const std::string& name) const {
  auto it = fields.find(name);
  if (it == fields.end()) return std::nullopt;
  return it->second;
}

namespace {

[[noreturn]] void row_error(const std::string& source, std::size_t line, const std::string& column,
                            const std::string& msg) {
  fail(ErrorKind::kParse,
       source + " line " + std::to_string(line) + ", field '" + column + "': " + msg);
}

Date cell_date(const csv::Row& row, std::size_t idx, const std::string& col,
               const std::string& source) {
  if (idx >= row.cells.size()) row_error(source, row.line, col, "missing cell");
  auto d = try_parse_date(row.cells[idx]);
  if (!d) row_error(source, row.line, col, "invalid date '" + row.cells[idx] + "'");
  return *d;
}

double cell_number(const csv::Row& row, std::size_t idx, const std::string& col,
                   const std::string& source) {
  if (idx >= row.cells.size()) row_error(source, row.line, col, "missing cell");
  auto v = csv::parse_number(row.cells[idx]);
  if (!v || !std::isfinite(*v)) row_error(source, row.line, col, "invalid number '" + row.cells[idx] + "'");
  return *v;
}

}  // namespace

std::vector<FundamentalRecord> parse_fundamentals(const csv::Table& table, const std::string& source) {
  std::vector<FundamentalRecord> out;
  if (table.header.empty()) return out;
  const auto c_ticker = table.column("ticker", source);
  const auto c_sector = table.column("sector", source);
  const auto c_qend = table.column("quarter_end", source);
  const auto c_release = table.column("release_date", source);
  std::vector<std::size_t> field_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (i != c_ticker && i != c_sector && i != c_qend && i != c_release) field_cols.push_back(i);

  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, source + " line " + std::to_string(row.line) + ": expected " +
                                  std::to_string(table.header.size()) + " cells, found " +
                                  std::to_string(row.cells.size()));
    FundamentalRecord rec;
    rec.ticker = row.cells[c_ticker];
    if (rec.ticker.empty()) row_error(source, row.line, "ticker", "empty ticker");
    int sector = 0;
    const auto& sc = row.cells[c_sector];
    auto [p, ec] = std::from_chars(sc.data(), sc.data() + sc.size(), sector);
    if (ec != std::errc{} || p != sc.data() + sc.size())
      row_error(source, row.line, "sector", "invalid sector '" + sc + "'");
    if (!is_gics_sector(sector))
      row_error(source, row.line, "sector", "unknown GICS sector code " + sc);
    rec.sector = sector;
    rec.quarter_end = cell_date(row, c_qend, "quarter_end", source);
    if (!is_quarter_end(rec.quarter_end))
      row_error(source, row.line, "quarter_end",
                format_date(rec.quarter_end) + " is not a calendar quarter end");
    rec.release_date = cell_date(row, c_release, "release_date", source);
    if (rec.release_date < rec.quarter_end)
      row_error(source, row.line, "release_date", "release date precedes quarter end");
    for (auto idx : field_cols) {
      const auto& name = table.header[idx];
      if (row.cells[idx].empty()) {
        rec.fields[name] = std::nullopt;
      } else {
        rec.fields[name] = cell_number(row, idx, name, source);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<FundamentalRecord> load_fundamentals(const std::filesystem::path& path) {
  return parse_fundamentals(csv::read_file(path), path.filename().string());
}

std::string serialize_fundamentals(const std::vector<FundamentalRecord>& records,
                                   std::vector<std::string> field_names) {
  if (field_names.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records)
      for (const auto& [k, v] : r.fields) seen.insert(k);
    field_names.assign(seen.begin(), seen.end());
  }
  std::vector<std::string> header = {"ticker", "sector", "quarter_end", "release_date"};
  header.insert(header.end(), field_names.begin(), field_names.end());
  std::string out = csv::join(header) + "\n";
  for (const auto& r : records) {
    std::vector<std::string> cells = {r.ticker, std::to_string(r.sector), format_date(r.quarter_end),
                                      format_date(r.release_date)};
    for (const auto& f : field_names) {
      auto v = r.get(f);
      cells.push_back(v ? csv::format_number(*v) : "");
    }
    out += csv::join(cells) + "\n";
  }
  return out;
}

std::vector<FundamentalRecord> filter_lookahead(const std::vector<FundamentalRecord>& records,
                                                Date trade_date) {
  std::vector<FundamentalRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const FundamentalRecord& r) { return r.release_date <= trade_date; });
  return out;
}

PriceSeries::PriceSeries(std::string ticker, std::vector<std::pair<Date, double>> obs)
    : ticker_(std::move(ticker)) {
  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (i > 0 && obs[i].first == obs[i - 1].first)
      fail(ErrorKind::kParse, "duplicate price for " + ticker_ + " on " + format_date(obs[i].first));
    if (!(obs[i].second > 0.0) || !std::isfinite(obs[i].second))
      fail(ErrorKind::kParse, "non-positive price for " + ticker_ + " on " + format_date(obs[i].first));
    dates_.push_back(obs[i].first);
    closes_.push_back(obs[i].second);
  }
}

std::optional<std::pair<Date, double>> PriceSeries::on_or_after(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end()) return std::nullopt;
  auto i = std::size_t(it - dates_.begin());
  return std::pair{dates_[i], closes_[i]};
}

std::optional<std::pair<Date, double>> PriceSeries::on_or_before(Date d) const {
  auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.begin()) return std::nullopt;
  auto i = std::size_t(it - dates_.begin()) - 1;
  return std::pair{dates_[i], closes_[i]};
}

std::optional<double> PriceSeries::on(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return closes_[std::size_t(it - dates_.begin())];
}

PricePanel parse_prices(const csv::Table& table, const std::string& source) {
  PricePanel panel;
  if (table.header.empty()) return panel;
  const auto c_date = table.column("date", source);
  const auto c_ticker = table.column("ticker", source);
  const auto c_close = table.column("adj_close", source);
  std::map<std::string, std::vector<std::pair<Date, double>>> obs;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, source + " line " + std::to_string(row.line) + ": wrong cell count");
    Date d = cell_date(row, c_date, "date", source);
    double px = cell_number(row, c_close, "adj_close", source);
    if (!(px > 0.0)) row_error(source, row.line, "adj_close", "price must be positive");
    if (row.cells[c_ticker].empty()) row_error(source, row.line, "ticker", "empty ticker");
    obs[row.cells[c_ticker]].emplace_back(d, px);
  }
  for (auto& [ticker, o] : obs) panel.emplace(ticker, PriceSeries(ticker, std::move(o)));
  return panel;
}

PricePanel load_prices(const std::filesystem::path& path) {
  return parse_prices(csv::read_file(path), path.filename().string());
}

std::string serialize_prices(const PricePanel& panel) {
  // Rows ordered by date, then ticker.
  std::vector<std::tuple<Date, const std::string*, double>> rows;
  for (const auto& [ticker, s] : panel)
    for (std::size_t i = 0; i < s.size(); ++i) rows.emplace_back(s.dates()[i], &ticker, s.closes()[i]);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    return *std::get<1>(a) < *std::get<1>(b);
  });
  std::string out = "date,ticker,adj_close\n";
  for (const auto& [d, t, px] : rows) out += format_date(d) + "," + *t + "," + csv::format_number(px) + "\n";
  return out;
}

TradingDays observed_trading_days(const PricePanel& panel) {
  std::vector<Date> all;
  for (const auto& [t, s] : panel) all.insert(all.end(), s.dates().begin(), s.dates().end());
  return TradingDays(std::move(all));
}

void UniverseCalendar::add(Date quarter_start, const std::string& ticker) {
  if (!is_quarter_start(quarter_start))
    fail(ErrorKind::kInvalidArgument, format_date(quarter_start) + " is not a quarter start");
  by_quarter_[quarter_start].insert(ticker);
}

bool UniverseCalendar::covers(Date d) const {
  return by_quarter_.count(Quarter::containing(d).start()) > 0;
}

const std::set<std::string>& UniverseCalendar::constituents_at(Date d) const {
  auto it = by_quarter_.find(Quarter::containing(d).start());
  if (it == by_quarter_.end()) {
    std::string range = by_quarter_.empty()
                            ? std::string("empty calendar")
                            : format_date(by_quarter_.begin()->first) + " .. " +
                                  format_date(Quarter::containing(by_quarter_.rbegin()->first).end());
    fail(ErrorKind::kData, "universe has no constituents for " + format_date(d) + " (" + range + ")");
  }
  return it->second;
}

std::set<std::string> UniverseCalendar::all_tickers() const {
  std::set<std::string> out;
  for (const auto& [q, s] : by_quarter_) out.insert(s.begin(), s.end());
  return out;
}

void UniverseCalendar::validate_against(const PricePanel& prices) const {
  std::vector<std::string> missing;
  for (const auto& t : all_tickers())
    if (!prices.count(t) || prices.at(t).empty()) missing.push_back(t);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    fail(ErrorKind::kData, std::to_string(missing.size()) + " universe tickers lack prices: " + list);
  }
}

UniverseCalendar parse_universe(const csv::Table& table, const std::string& source) {
  UniverseCalendar cal;
  if (table.header.empty()) return cal;
  const auto c_q = table.column("quarter_start", source);
  const auto c_t = table.column("ticker", source);
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, source + " line " + std::to_string(row.line) + ": wrong cell count");
    Date q = cell_date(row, c_q, "quarter_start", source);
    if (!is_quarter_start(q))
      row_error(source, row.line, "quarter_start", format_date(q) + " is not a quarter start");
    cal.add(q, row.cells[c_t]);
  }
  return cal;
}

UniverseCalendar load_universe(const std::filesystem::path& path) {
  return parse_universe(csv::read_file(path), path.filename().string());
}

std::size_t SectorTable::missing_cells() const {
  std::size_t n = 0;
  for (const auto& r : rows)
    n += std::size_t(std::count_if(r.values.begin(), r.values.end(), [](const auto& v) { return !v; }));
  return n;
}

namespace {

void drop_stock(SectorTable& t, const std::string& ticker) {
  std::erase_if(t.rows, [&](const SectorTable::Row& r) { return r.ticker == ticker; });
}

void drop_factor(SectorTable& t, const std::string& name) {
  auto it = std::find(t.factor_names.begin(), t.factor_names.end(), name);
  if (it == t.factor_names.end()) return;
  auto idx = std::size_t(it - t.factor_names.begin());
  t.factor_names.erase(it);
  for (auto& r : t.rows) r.values.erase(r.values.begin() + std::ptrdiff_t(idx));
}

}  // namespace

CleanResult clean_missing(const SectorTable& input, const CleaningRules& rules) {
  CleanResult res{input, {}};
  SectorTable& t = res.table;
  auto fail_empty = [&] {
    fail(ErrorKind::kData, "sector " + std::to_string(t.sector) + " has no stocks left after cleaning");
  };
  if (t.rows.empty()) fail_empty();

  // Worst stocks first, while the sector is above its missingness limit and removing the
  // worst stock actually lowers the fraction.
  while (!t.rows.empty() && !t.factor_names.empty()) {
    const double cells = double(t.rows.size() * t.factor_names.size());
    const std::size_t missing = t.missing_cells();
    if (double(missing) / cells <= rules.sector_missing_max) break;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_stock;  // missing, rows
    for (const auto& r : t.rows) {
      auto& e = per_stock[r.ticker];
      e.first += std::size_t(std::count_if(r.values.begin(), r.values.end(), [](const auto& v) { return !v; }));
      e.second += 1;
    }
    const std::string* worst = nullptr;
    std::pair<std::size_t, std::size_t> worst_e{0, 0};
    for (const auto& [ticker, e] : per_stock) {  // map order = lexicographic tie-break
      if (!worst || e.first > worst_e.first) {
        worst = &ticker;
        worst_e = e;
      }
    }
    const double stock_fraction = double(worst_e.first) / double(worst_e.second * t.factor_names.size());
    if (stock_fraction <= double(missing) / cells) break;
    std::string ticker = *worst;
    res.report.stocks.push_back({ticker, worst_e.first});
    drop_stock(t, ticker);
  }
  if (t.rows.empty()) fail_empty();

  for (std::size_t j = 0; j < t.factor_names.size();) {
    std::size_t miss = 0;
    for (const auto& r : t.rows) miss += r.values[j] ? 0 : 1;
    const double frac = double(miss) / double(t.rows.size());
    if (frac > rules.factor_missing_max) {
      res.report.factors.push_back({t.factor_names[j], frac});
      drop_factor(t, t.factor_names[j]);
    } else {
      ++j;
    }
  }

  if (t.factor_names.empty())
    fail(ErrorKind::kData, "sector " + std::to_string(t.sector) + " has no factors left after cleaning");

  std::vector<SectorTable::Row> kept;
  kept.reserve(t.rows.size());
  for (auto& r : t.rows) {
    if (std::all_of(r.values.begin(), r.values.end(), [](const auto& v) { return v.has_value(); }))
      kept.push_back(std::move(r));
    else
      res.report.rows.push_back({r.ticker, r.quarter});
  }
  t.rows = std::move(kept);
  if (t.rows.empty()) fail_empty();
  return res;
}

SectorTable replay_cleaning(const SectorTable& input, const CleaningReport& report) {
  SectorTable t = input;
  for (const auto& s : report.stocks) drop_stock(t, s.ticker);
  for (const auto& f : report.factors) drop_factor(t, f.factor);
  for (const auto& rr : report.rows)
    std::erase_if(t.rows, [&](const SectorTable::Row& r) { return r.ticker == rr.ticker && r.quarter == rr.quarter; });
  return t;
}

}  // namespace dynrec
