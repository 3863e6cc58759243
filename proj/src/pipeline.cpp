#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "error.hpp"
#include "factors.hpp"
#include "ingest.hpp"
#include "log.hpp"

namespace dynrec {

const char* const kRunFiles[] = {"calendar.csv",   "panel.csv",  "selection_log.csv", "recommendations.csv",
                                 "audit_rows.csv", "models.json", "weights.csv",      "blotter.csv",
                                 "equity_curve.csv", "report.json"};
const std::size_t kRunFilesCount = std::size(kRunFiles);

std::string serialize_audit(const std::vector<AuditRow>& rows) {
  std::string s = "event_index,trade_date,sector,ticker,quarter_end,role,release_date,realization_date\n";
  for (const auto& r : rows)
    s += csv::join({std::to_string(r.event_index), format_date(r.trade_date), std::to_string(r.sector), r.ticker,
                    format_date(r.quarter_end), r.role, format_date(r.release_date),
                    r.realization_date ? format_date(*r.realization_date) : std::string()}) +
         "\n";
  return s;
}

BenchmarkSeries load_benchmark(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const std::string src = path.string();
  const auto cd = table.column("date", src), cv = table.column("value", src);
  BenchmarkSeries b;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, src + " line " + std::to_string(row.line) + ": wrong cell count");
    auto d = try_parse_date(row.cells[cd]);
    auto v = csv::parse_number(row.cells[cv]);
    if (!d || !v || !(*v > 0.0))
      fail(ErrorKind::kParse, src + " line " + std::to_string(row.line) + ": expected a date and a positive value");
    if (!b.points.empty() && !(b.points.back().first < *d))
      fail(ErrorKind::kParse, src + " line " + std::to_string(row.line) + ": dates must be strictly increasing");
    b.points.emplace_back(*d, *v);
  }
  if (b.points.size() < 2) fail(ErrorKind::kParse, src + ": benchmark needs at least two rows");
  return b;
}

const std::chrono::days kMaxBenchmarkGap{7};

std::vector<double> align_benchmark(const BenchmarkSeries& bench, const EquityCurve& curve) {
  std::vector<double> out;
  if (bench.points.empty()) return out;
  std::size_t k = 0;
  for (const auto& p : curve) {
    while (k + 1 < bench.points.size() && bench.points[k + 1].first <= p.date) ++k;
    const auto& [d, v] = bench.points[k];
    if (d > p.date || p.date - d > kMaxBenchmarkGap) return {};
    out.push_back(v);
  }
  return out;
}

nlohmann::ordered_json report_to_json(const PerformanceReport& r) {
  nlohmann::ordered_json j;
  j["start_value"] = r.start_value;
  j["end_value"] = r.end_value;
  j["total_return"] = r.total_return;
  j["max_drawdown"] = r.max_drawdown;
  j["annualized_return"] = r.annualized_return;
  j["annualized_std"] = r.annualized_std;
  j["sharpe"] = r.sharpe ? nlohmann::ordered_json(*r.sharpe) : nlohmann::ordered_json(nullptr);
  j["rf"] = r.rf;
  j["days"] = r.days;
  return j;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kNumerical, std::string("stage ") + name + ": " + e.what());
  }
}

TradingDays load_trading_days(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto c = table.column("date", path.string());
  std::vector<Date> days;
  for (const auto& row : table.rows) {
    auto d = try_parse_date(row.cells.at(c));
    if (!d) fail(ErrorKind::kParse, path.string() + " line " + std::to_string(row.line) + ": bad date");
    days.push_back(*d);
  }
  if (days.empty()) fail(ErrorKind::kParse, path.string() + ": no trading days");
  return TradingDays(std::move(days));
}

std::string selection_csv(const std::vector<SelectionRecord>& sel) {
  std::string s = "trade_date,sector,mse_ols,mse_ridge,mse_step,mse_rf,mse_gbm,chosen,fallback_used\n";
  for (const auto& r : sel) {
    std::vector<std::string> cells = {format_date(r.trade_date), std::to_string(r.sector)};
    for (auto f : models::kAllFamilies) {
      auto it = std::find_if(r.scores.begin(), r.scores.end(), [&](const ModelScore& m) { return m.family == f; });
      cells.push_back(it == r.scores.end() ? "" : (std::isfinite(it->mse) ? csv::format_number(it->mse) : "inf"));
    }
    cells.push_back(std::string(models::family_name(r.chosen)));
    cells.push_back(r.fallback_used ? "1" : "0");
    s += csv::join(cells) + "\n";
  }
  return s;
}

std::string recommendations_csv(const std::vector<Recommendation>& recs) {
  std::string s = "trade_date,sector,ticker,predicted_return,model_used\n";
  for (const auto& r : recs)
    for (const auto& p : r.picks)
      s += csv::join({format_date(r.trade_date), std::to_string(r.sector), p.ticker,
                      csv::format_number(p.predicted_return), std::string(models::family_name(r.model_used))}) +
           "\n";
  return s;
}

std::size_t expected_picks(std::size_t n, double fraction) {
  return std::clamp<std::size_t>(std::size_t(std::floor(fraction * double(n) + 0.5 + 1e-9)), 1, n);
}

struct EventWork {
  std::vector<SectorData> sectors;
  std::map<int, std::size_t> predict_rows;
};

}  // namespace

RunResult cmd_run(const RunConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  std::filesystem::create_directories(out);
  const auto marker = out / "INCOMPLETE";
  std::filesystem::remove(marker);
  ScopedLogFile log_file(out / "run.log");
  std::string current = "setup";
  try {
    RunResult res;

    current = "ingest";
    auto records = stage("ingest", [&] { return load_fundamentals(cfg.fundamentals); });
    auto prices = stage("ingest", [&] { return load_prices(cfg.prices); });
    auto universe = stage("ingest", [&] {
      auto u = load_universe(cfg.universe);
      u.validate_against(prices);
      return u;
    });
    if (records.empty()) fail(ErrorKind::kData, "stage ingest: fundamentals file has no records");
    Date start = cfg.data_start.value_or(Quarter::containing(std::min_element(records.begin(), records.end(),
                                                                              [](auto& a, auto& b) {
                                                                                return a.quarter_end < b.quarter_end;
                                                                              })->quarter_end)
                                             .start());
    Date last_price = start;
    for (const auto& [t, s] : prices)
      if (!s.empty()) last_price = std::max(last_price, s.dates().back());
    Date end = cfg.data_end.value_or(last_price);
    TradingDays days = stage("ingest", [&] {
      return cfg.trading_days ? load_trading_days(*cfg.trading_days) : TradingDays::weekdays(start, end, cfg.holidays);
    });
    logger()->info("loaded {} fundamentals records, {} price series, data {} .. {}", records.size(), prices.size(),
                   format_date(start), format_date(end));

    current = "factors";
    FactorStore store = stage("factors", [&] { return FactorStore(records, prices, days, 1); });
    std::set<int> sectors;
    for (const auto& r : records) sectors.insert(r.sector);
    logger()->info("{} factor observations, {} lookahead records dropped", store.size(), store.lookahead_dropped());

    current = "scheduler";
    res.calendar = stage("scheduler", [&] { return build_calendar(start, end, days, cfg.window); });
    csv::write_file(out / "calendar.csv", serialize_calendar(res.calendar));
    {
      std::vector<FactorPanel> panels;
      const Quarter first = res.calendar.first_quarter;
      const Quarter last = first.next(res.calendar.span_quarters - 1);
      for (int s : sectors) {
        try {
          panels.push_back(build_panel(s, first, last, store, universe));
        } catch (const Error& e) {
          logger()->info("panel export: {}", e.what());
        }
      }
      csv::write_file(out / "panel.csv", serialize_panels(panels));
    }

    current = "recommender";
    RecommenderOptions ropt;
    ropt.specs = cfg.model_specs();
    ropt.pick_fraction = cfg.pick_fraction;
    ropt.parallel = cfg.parallel;
    nlohmann::ordered_json models_json = nlohmann::ordered_json::array();
    std::vector<std::pair<const RebalanceEvent*, std::vector<SectorOutcome>>> outcomes;
    std::size_t leak_filtered = 0;
    std::map<std::pair<int, int>, std::size_t> predict_counts;  // (event, sector) -> rows offered
    for (const auto& ev : res.calendar.events) {
      stage("recommender", [&] {
        const Quarter qe = ev.quarter;
        const std::set<Quarter> test_q(ev.test_quarters.begin(), ev.test_quarters.end());
        std::vector<SectorData> data;
        for (int s : sectors) {
          auto hist = build_sector_table(s, ev.training_quarters.front(), ev.test_quarters.back(), store, universe, true);
          auto pred = build_sector_table(s, qe, qe, store, universe, false);
          SectorTable table = hist.table;
          table.rows.clear();
          std::vector<const FactorObservation*> payload;
          for (const auto& row : hist.table.rows) {
            const auto* o = hist.payload[row.tag];
            if (o->release_date > ev.trade_date || !o->realization_date || *o->realization_date > ev.trade_date) {
              ++leak_filtered;
              continue;
            }
            auto r = row;
            r.tag = payload.size();
            payload.push_back(o);
            table.rows.push_back(std::move(r));
          }
          for (const auto& row : pred.table.rows) {
            const auto* o = pred.payload[row.tag];
            if (o->release_date > ev.trade_date) {
              ++leak_filtered;
              continue;
            }
            auto r = row;
            r.tag = payload.size();
            payload.push_back(o);
            table.rows.push_back(std::move(r));
          }
          if (table.rows.empty()) continue;
          CleanResult cleaned;
          try {
            cleaned = clean_missing(table, cfg.cleaning);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::kData) throw;
            logger()->warn("{} sector {}: {}, skipped", format_date(ev.trade_date), s, e.what());
            continue;
          }
          SectorData sd;
          sd.sector = s;
          for (auto* p : {&sd.train, &sd.test, &sd.predict}) {
            p->sector = s;
            p->factor_names = cleaned.table.factor_names;
          }
          for (const auto& row : cleaned.table.rows) {
            const auto* o = payload[row.tag];
            PanelRow pr;
            pr.ticker = row.ticker;
            pr.quarter = row.quarter;
            for (const auto& v : row.values) pr.x.push_back(*v);
            const Quarter q = Quarter::containing(row.quarter);
            AuditRow a{ev.index, ev.trade_date, s, row.ticker, row.quarter, "", o->release_date, std::nullopt};
            if (q == qe) {
              a.role = "predict";
              sd.predict.rows.push_back(std::move(pr));
            } else {
              pr.fwd_return = *o->fwd_return;
              a.role = test_q.count(q) ? "test" : "train";
              a.realization_date = o->realization_date;
              (test_q.count(q) ? sd.test : sd.train).rows.push_back(std::move(pr));
            }
            res.audit.push_back(std::move(a));
          }
          predict_counts[{ev.index, s}] = sd.predict.rows.size();
          data.push_back(std::move(sd));
        }
        auto got = recommend(ev, data, ropt);
        if (got.empty()) {
          const bool no_rows = std::all_of(data.begin(), data.end(), [](const SectorData& d) { return d.predict.rows.empty(); });
          if (no_rows)
            logger()->info("{}: no fundamentals to predict from yet, event skipped", format_date(ev.trade_date));
          else
            logger()->warn("{}: no sector produced a recommendation", format_date(ev.trade_date));
        }
        for (auto& o : got) {
          res.selections.push_back(o.selection);
          res.recommendations.push_back(o.recommendation);
          auto j = models::dump_model(*o.model);
          nlohmann::ordered_json entry;
          entry["trade_date"] = format_date(ev.trade_date);
          entry["sector"] = o.recommendation.sector;
          entry["chosen"] = models::family_name(o.selection.chosen);
          entry["model"] = nlohmann::ordered_json::parse(j.dump());
          models_json.push_back(std::move(entry));
        }
        outcomes.emplace_back(&ev, std::move(got));
        return 0;
      });
    }
    if (leak_filtered) logger()->info("{} rows withheld by the leakage guard", leak_filtered);
    csv::write_file(out / "selection_log.csv", selection_csv(res.selections));
    csv::write_file(out / "recommendations.csv", recommendations_csv(res.recommendations));
    csv::write_file(out / "audit_rows.csv", serialize_audit(res.audit));
    csv::write_file(out / "models.json", models_json.dump(1) + "\n");

    current = "allocation";
    const bool need_cov = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                      [](auto m) { return m != AllocationMethod::kEqual; });
    for (const auto& [ev, got] : outcomes) {
      if (got.empty()) continue;
      stage("allocation", [&] {
        std::map<std::string, double> mu;
        for (const auto& o : got)
          for (const auto& p : o.recommendation.picks) mu[p.ticker] = p.predicted_return;
        AllocationRequest req;
        req.trade_date = ev->trade_date;
        req.rf = cfg.risk_free;
        req.ub_base = cfg.ub_base;
        req.frontier_points = cfg.frontier_points;
        req.mu.resize(Eigen::Index(mu.size()));
        for (const auto& [t, m] : mu) {
          req.mu(Eigen::Index(req.tickers.size())) = m;
          req.tickers.push_back(t);
        }
        std::optional<CovarianceEstimate> cov;
        if (need_cov) cov = estimate_covariance(prices, req.tickers, ev->trade_date, days, cfg.covariance);
        for (auto m : cfg.methods) {
          req.method = m;
          try {
            res.weights.push_back(allocate(req, cov ? &*cov : nullptr));
          } catch (const Error& e) {
            throw Error(e.kind(), format_date(ev->trade_date) + " " + std::string(method_name(m)) + ": " + e.what());
          }
        }
        return 0;
      });
    }
    csv::write_file(out / "weights.csv", serialize_weights(res.weights));

    current = "backtest";
    const Date bt_end = days.on_or_before(end).value_or(end);
    BacktestOptions bopt;
    bopt.initial_value = cfg.initial_value;
    bopt.cost_rate = cfg.cost_rate;
    bopt.rf = cfg.risk_free;
    for (auto m : cfg.methods) {
      std::vector<PortfolioWeights> sched;
      for (const auto& w : res.weights)
        if (w.method == m) sched.push_back(w);
      res.backtests.push_back(stage("backtest", [&] { return run_backtest(sched, prices, days, bt_end, bopt); }));
    }
    csv::write_file(out / "blotter.csv", serialize_blotters(res.backtests));
    csv::write_file(out / "equity_curve.csv", serialize_curves(res.backtests));

    current = "report";
    auto& rep = res.report;
    rep["config"] = {{"seed", cfg.seed},
                     {"pick_fraction", cfg.pick_fraction},
                     {"cost_rate", cfg.cost_rate},
                     {"risk_free", cfg.risk_free},
                     {"ub_base", cfg.ub_base},
                     {"frontier_points", cfg.frontier_points},
                     {"min_train", cfg.window.min_train},
                     {"max_train", cfg.window.max_train},
                     {"test_quarters", cfg.window.test},
                     {"initial_value", cfg.initial_value}};
    rep["data"] = {{"start", format_date(start)},
                   {"end", format_date(bt_end)},
                   {"records", records.size()},
                   {"lookahead_dropped", store.lookahead_dropped()},
                   {"observations", store.size()},
                   {"sectors", std::vector<int>(sectors.begin(), sectors.end())}};
    rep["events"] = res.calendar.events.size();
    nlohmann::ordered_json counts;
    for (auto f : models::kAllFamilies) counts[std::string(models::family_name(f))] = 0;
    std::size_t fallbacks = 0;
    for (const auto& s : res.selections) {
      counts[std::string(models::family_name(s.chosen))] = counts[std::string(models::family_name(s.chosen))].get<int>() + 1;
      fallbacks += s.fallback_used;
    }
    rep["model_selection"] = counts;
    rep["fallbacks"] = fallbacks;

    std::optional<BenchmarkSeries> bench;
    if (cfg.benchmark) bench = stage("report", [&] { return load_benchmark(*cfg.benchmark); });

    // Invariant checks over the emitted results.
    bool weights_ok = true;
    for (const auto& w : res.weights) {
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(w.weights.data(), Eigen::Index(w.weights.size()));
      try {
        check_weights(v, weight_cap(w.weights.size(), cfg.ub_base));
      } catch (const Error&) {
        weights_ok = false;
      }
    }
    std::size_t leaks = 0;
    for (const auto& a : res.audit)
      if (a.release_date > a.trade_date || (a.realization_date && *a.realization_date > a.trade_date)) ++leaks;
    bool indicator_ok = true, picks_ok = true;
    for (std::size_t k = 0; k < res.selections.size(); ++k) {
      auto ind = res.selections[k].indicator();
      indicator_ok = indicator_ok && std::accumulate(ind.begin(), ind.end(), 0) == 1;
      const auto& r = res.recommendations[k];
      int ev_index = 0;
      for (const auto& e : res.calendar.events)
        if (e.trade_date == r.trade_date) ev_index = e.index;
      picks_ok = picks_ok && r.picks.size() == expected_picks(predict_counts[{ev_index, r.sector}], cfg.pick_fraction);
    }

    nlohmann::ordered_json methods = nlohmann::ordered_json::object();
    double worst_daily = 0.0, worst_rebalance = 0.0, worst_cost = 0.0, min_cash = 0.0;
    for (const auto& bt : res.backtests) {
      auto j = report_to_json(bt.report);
      j["label"] = method_label(bt.method);
      j["total_cost"] = bt.total_cost;
      j["trades"] = bt.blotter.size();
      if (cfg.in_sample_end) {
        EquityCurve ins, oos;
        for (const auto& p : bt.curve) (p.date <= *cfg.in_sample_end ? ins : oos).push_back(p);
        if (!oos.empty() && !ins.empty()) oos.insert(oos.begin(), ins.back());
        j["in_sample"] = ins.size() >= 2 ? report_to_json(metrics(ins, cfg.risk_free)) : nlohmann::ordered_json(nullptr);
        j["out_of_sample"] = oos.size() >= 2 ? report_to_json(metrics(oos, cfg.risk_free)) : nlohmann::ordered_json(nullptr);
      }
      auto acc = verify_accounting(bt, prices, cfg.initial_value);
      worst_daily = std::max(worst_daily, acc.max_daily_residual);
      worst_rebalance = std::max(worst_rebalance, acc.max_rebalance_residual);
      worst_cost = std::max(worst_cost, acc.cost_difference);
      min_cash = std::min(min_cash, acc.min_cash);
      methods[std::string(method_name(bt.method))] = j;
    }
    rep["methods"] = methods;
    if (bench && !res.backtests.empty()) {
      auto aligned = align_benchmark(*bench, res.backtests.front().curve);
      if (aligned.size() >= 2) {
        auto j = report_to_json(metrics(aligned, cfg.risk_free));
        j["label"] = "Benchmark";
        j["values"] = aligned;
        rep["benchmark"] = j;
      } else {
        logger()->warn("benchmark does not cover the backtest period; omitted");
      }
    }
    const double tol = 1e-6;
    nlohmann::ordered_json checks;
    checks["weights_valid"] = weights_ok;
    checks["leakage_violations"] = leaks;
    checks["selection_indicator"] = indicator_ok;
    checks["pick_counts"] = picks_ok;
    checks["accounting_max_daily_residual"] = worst_daily;
    checks["accounting_max_rebalance_residual"] = worst_rebalance;
    checks["cost_sum_difference"] = worst_cost;
    checks["min_cash"] = min_cash;
    const bool all = weights_ok && leaks == 0 && indicator_ok && picks_ok && worst_daily <= tol &&
                     worst_rebalance <= tol && worst_cost <= tol && min_cash >= -tol;
    checks["all_passed"] = all;
    rep["checks"] = checks;
    if (!all) logger()->warn("invariant checks failed: {}", checks.dump());
    csv::write_file(out / "report.json", rep.dump(2) + "\n");
    return res;
  } catch (const Error& e) {
    logger()->error("{}", e.what());
    try {
      csv::write_file(marker, std::string("stage: ") + current + "\n" + e.what() + "\n");
    } catch (...) {
    }
    throw;
  }
}

}  // namespace dynrec
