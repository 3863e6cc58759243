#include "synth.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "recommender.hpp"
#include "rng.hpp"

namespace dynrec {

std::vector<double> default_synth_beta() {
  //       REVGH EPS  ROA  ROE  PE   PS   NPM  GPM  OM   PB
  return {0.0,  0.0, 1.0, 0.0, 0.0, 0.0, 0.4, 0.1, 0.2, 0.0,
  //       PCFO CR    EM   EVCFO LTDTA WCR   DE     QR   DSI      DPO
          0.0,  0.05, 0.0, 0.0,  -0.1, 0.02, -0.02, 0.0, -0.0002, 0.0};
}

namespace {

constexpr std::uint64_t kMarketStream = 1;
constexpr std::uint64_t kStockStream = 2;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

struct Profile {
  double npm, gpm, spread, da, growth, turnover, equity, debt, lt_share, current, wcr, inventory, cash, payables,
      payout, shares;
};

Profile draw_profile(Rng& rng) {
  Profile p{};
  p.npm = between(rng, 0.02, 0.20);
  p.gpm = between(rng, 0.25, 0.65);
  p.spread = between(rng, 0.02, 0.08);
  p.da = between(rng, 0.02, 0.06);
  p.growth = 0.01 + 0.02 * rng.normal();
  p.turnover = between(rng, 0.2, 0.6);
  p.equity = between(rng, 0.2, 0.7);
  p.debt = between(rng, 0.1, 0.5);
  p.lt_share = between(rng, 0.5, 0.9);
  p.current = between(rng, 0.2, 0.5);
  p.wcr = between(rng, 1.0, 2.5);
  p.inventory = between(rng, 0.05, 0.35);
  p.cash = between(rng, 0.05, 0.35);
  p.payables = between(rng, 0.2, 0.8);
  p.payout = between(rng, 0.0, 0.5);
  p.shares = between(rng, 50.0, 500.0);
  return p;
}

double expected_return(const FactorVector& x, const std::vector<double>& beta, double intercept) {
  double r = intercept;
  for (std::size_t j = 0; j < kFactorCount; ++j)
    if (x.values[j]) r += beta[j] * *x.values[j];  // factors undefined at generation contribute nothing
  return r;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthData out;
  const Quarter q0 = Quarter::containing(cfg.start);
  const int nq = cfg.quarters;

  // Quarter t (0..nq) has anchor A_t; prices run through the first trading day on/after A_nq.
  std::vector<Date> anchors;
  for (int t = 0; t <= nq; ++t) anchors.push_back(lagged_trade_anchor(q0.next(t).end()));
  auto days = TradingDays::weekdays(cfg.start, anchors.back() + std::chrono::days{14}, cfg.holidays);
  std::vector<Date> trade(std::size_t(nq + 1));
  for (int t = 0; t <= nq; ++t) {
    auto d = days.on_or_after(anchors[std::size_t(t)]);
    if (!d) fail(ErrorKind::kData, "synth: calendar too short");
    trade[std::size_t(t)] = *d;
  }
  out.trading_days = TradingDays(days.between(cfg.start, trade.back()));
  const auto& axis = out.trading_days.days();
  auto day_index = [&](Date d) { return std::size_t(std::lower_bound(axis.begin(), axis.end(), d) - axis.begin()); };

  const double dt = 1.0 / 252.0;
  std::vector<double> market(axis.size(), 0.0);
  {
    Rng rng(derive_seed(cfg.seed, kMarketStream));
    for (auto& m : market) m = cfg.market_vol * std::sqrt(dt) * rng.normal();
  }

  out.truth.seed = cfg.seed;
  out.truth.intercept = cfg.intercept;
  out.truth.noise_sigma = cfg.noise_sigma;

  // expected[sector][t] -> (ticker, E r)
  std::map<int, std::vector<std::vector<Pick>>> expected;

  for (int s = 0; s < cfg.sectors; ++s) {
    const int sector = kGicsSectors[std::size_t(s)];
    const auto& beta = cfg.beta_for(sector);
    out.truth.beta[sector] = beta;
    expected[sector].assign(std::size_t(nq), {});
    for (int k = 0; k < cfg.stocks_per_sector; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "T%02d%03d", sector, k + 1);
      const std::string ticker = buf;
      Rng rng(derive_seed(cfg.seed, kStockStream, std::uint64_t(s) * 100000 + std::uint64_t(k)));
      const Profile p = draw_profile(rng);
      const double idio = cfg.price_vol * std::sqrt(dt);
      const double loading = between(rng, 0.6, 1.4);

      double revenue = std::exp(std::log(1000.0) + 0.5 * rng.normal());
      double npm_dev = 0.0;
      std::vector<FundamentalRecord> clean;
      std::vector<std::pair<Date, double>> obs;

      // Free walk from the first day to the first trade date.
      double log_s = std::log(revenue * 4.0 * between(rng, 1.0, 4.0) / p.shares);
      const std::size_t first_trade = day_index(trade[0]);
      for (std::size_t i = 0; i < first_trade; ++i) {
        obs.emplace_back(axis[i], std::exp(log_s));
        log_s += idio * rng.normal() + loading * market[i + 1] - 0.5 * idio * idio;
      }
      double s_t = std::exp(log_s);

      for (int t = 0; t < nq; ++t) {
        const Quarter q = q0.next(t);
        revenue *= std::exp(p.growth + 0.04 * rng.normal());
        npm_dev = 0.6 * npm_dev + 0.02 * rng.normal();
        const double npm = std::max(0.01, p.npm + npm_dev);
        const double gpm = std::max(npm + 0.05, p.gpm + 0.02 * rng.normal());
        const double om = npm + p.spread + 0.01 * rng.normal();
        const double assets = revenue / (p.turnover * std::exp(0.05 * rng.normal()));
        const double equity = assets * clamp(p.equity + 0.02 * rng.normal(), 0.1, 0.9);
        const double debt = assets * clamp(p.debt + 0.02 * rng.normal(), 0.02, 0.8);
        const double ca = assets * clamp(p.current + 0.02 * rng.normal(), 0.1, 0.7);
        const double cl = ca / clamp(p.wcr + 0.1 * rng.normal(), 0.6, 4.0);
        const double cogs = revenue * (1.0 - gpm);

        FundamentalRecord r;
        r.ticker = ticker;
        r.sector = sector;
        r.quarter_end = q.end();
        r.release_date = q.end() + std::chrono::days{20 + int(rng.index(26))};
        r.fields[field::kRevenue] = revenue;
        r.fields[field::kNetIncome] = npm * revenue;
        r.fields[field::kTotalAssets] = assets;
        r.fields[field::kEquity] = equity;
        r.fields[field::kCurrentAssets] = ca;
        r.fields[field::kCurrentLiabilities] = cl;
        r.fields[field::kInventory] = ca * clamp(p.inventory + 0.02 * rng.normal(), 0.01, 0.45);
        r.fields[field::kCash] = ca * clamp(p.cash + 0.02 * rng.normal(), 0.02, 0.45);
        r.fields[field::kLongTermDebt] = debt * p.lt_share;
        r.fields[field::kOperatingCashFlow] = revenue * std::max(0.01, npm + p.da + 0.02 * rng.normal());
        r.fields[field::kSharesOutstanding] = p.shares;
        r.fields[field::kCogs] = cogs;
        r.fields[field::kAccountsPayable] = cogs * clamp(p.payables + 0.05 * rng.normal(), 0.1, 1.2);
        r.fields[field::kOperatingIncome] = om * revenue;
        r.fields[field::kEbitda] = (om + p.da) * revenue;
        r.fields[field::kTotalDebt] = debt;
        r.fields[field::kDividends] = npm * revenue * p.payout;

        std::span<const FundamentalRecord> trailing;
        if (t >= 4) trailing = std::span<const FundamentalRecord>(&clean[std::size_t(t - 4)], 1);
        const FactorVector x = compute_factors(r, s_t, trailing);
        const double mean = expected_return(x, beta, cfg.intercept);
        const double ret = mean + cfg.noise_sigma * rng.normal();
        expected[sector][std::size_t(t)].push_back({ticker, mean});
        out.returns[{ticker, q.ordinal()}] = ret;

        // Bridge from trade[t] to trade[t+1] with the planted endpoint.
        const std::size_t a = day_index(trade[std::size_t(t)]);
        const std::size_t b = day_index(trade[std::size_t(t + 1)]);
        const double s_next = s_t * std::exp(ret);
        std::vector<double> walk(b - a + 1, 0.0);
        for (std::size_t i = a + 1; i <= b; ++i)
          walk[i - a] = walk[i - a - 1] + idio * rng.normal() + loading * market[i];
        const double l0 = std::log(s_t);
        const double span = double(b - a);
        obs.emplace_back(axis[a], s_t);
        for (std::size_t i = a + 1; i < b; ++i) {
          const double f = double(i - a) / span;
          obs.emplace_back(axis[i], std::exp(l0 + f * ret + walk[i - a] - f * walk.back()));
        }
        s_t = s_next;

        // Observation defects: late filing, blank cells. Generation above used the clean record.
        clean.push_back(r);
        FundamentalRecord published = r;
        if (rng.uniform() < cfg.late_rate) published.release_date = trade[std::size_t(t)] + std::chrono::days{1 + int(rng.index(30))};
        for (auto& [name, v] : published.fields)
          if (rng.uniform() < cfg.missing_rate) v.reset();
        out.fundamentals.push_back(std::move(published));
      }
      obs.emplace_back(trade.back(), s_t);
      out.prices[ticker] = PriceSeries(ticker, std::move(obs));
    }
  }

  for (Quarter q = q0; q.start() <= trade.back(); q = q.next())
    for (const auto& [ticker, series] : out.prices) out.universe.add(q.start(), ticker);

  for (auto& [sector, per_q] : expected)
    for (int t = 0; t < nq; ++t) {
      auto top = pick_top(per_q[std::size_t(t)], 0.2);
      TruthSet ts;
      ts.sector = sector;
      ts.quarter = q0.next(t);
      ts.trade_date = trade[std::size_t(t)];
      for (auto& pk : top) ts.tickers.push_back(pk.ticker);
      std::sort(ts.tickers.begin(), ts.tickers.end());
      out.truth.top.push_back(std::move(ts));
    }
  return out;
}

std::string serialize_universe(const UniverseCalendar& u) {
  std::string s = "quarter_start,ticker\n";
  for (const auto& [d, tickers] : u.quarters())
    for (const auto& t : tickers) s += format_date(d) + "," + t + "\n";
  return s;
}

std::string truth_to_json(const SynthTruth& t) {
  nlohmann::ordered_json j;
  j["seed"] = t.seed;
  j["intercept"] = t.intercept;
  j["noise_sigma"] = t.noise_sigma;
  std::vector<std::string> names(factor_names().begin(), factor_names().end());
  j["factor_names"] = names;
  auto& beta = j["beta"];
  beta = nlohmann::ordered_json::object();
  for (const auto& [s, b] : t.beta) beta[std::to_string(s)] = b;
  auto& top = j["top_quintile"];
  top = nlohmann::ordered_json::array();
  for (const auto& ts : t.top)
    top.push_back({{"sector", ts.sector},
                   {"quarter_end", format_date(ts.quarter.end())},
                   {"trade_date", format_date(ts.trade_date)},
                   {"tickers", ts.tickers}});
  return j.dump(2) + "\n";
}

SynthTruth parse_truth(const std::string& text) {
  SynthTruth t;
  try {
    auto j = nlohmann::json::parse(text);
    t.seed = j.at("seed").get<std::uint64_t>();
    t.intercept = j.at("intercept").get<double>();
    t.noise_sigma = j.at("noise_sigma").get<double>();
    for (auto& [k, v] : j.at("beta").items()) t.beta[std::stoi(k)] = v.get<std::vector<double>>();
    for (auto& e : j.at("top_quintile")) {
      TruthSet ts;
      ts.sector = e.at("sector").get<int>();
      ts.quarter = Quarter::containing(parse_date(e.at("quarter_end").get<std::string>()));
      ts.trade_date = parse_date(e.at("trade_date").get<std::string>());
      ts.tickers = e.at("tickers").get<std::vector<std::string>>();
      t.top.push_back(std::move(ts));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("truth.json: ") + e.what());
  }
  return t;
}

void write_synthetic(const SynthData& d, const std::filesystem::path& dir) {
  csv::write_file(dir / "fundamentals.csv", serialize_fundamentals(d.fundamentals, raw_field_names()));
  csv::write_file(dir / "prices.csv", serialize_prices(d.prices));
  csv::write_file(dir / "universe.csv", serialize_universe(d.universe));
  std::string td = "date\n";
  for (Date x : d.trading_days.days()) td += format_date(x) + "\n";
  csv::write_file(dir / "trading_days.csv", td);
  csv::write_file(dir / "truth.json", truth_to_json(d.truth));
}

}  // namespace dynrec
