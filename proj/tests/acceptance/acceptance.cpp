// Acceptance checks: one PASS/FAIL line per criterion.
// Usage: acceptance <work_dir>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "allocation.hpp"
#include "backtest.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "log.hpp"
#include "models/models.hpp"
#include "pipeline.hpp"
#include "recommender.hpp"
#include "rng.hpp"
#include "synth.hpp"

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kSharpeTolTable7a = 0.01;
constexpr double kSharpeTolTable8 = 0.005;
constexpr double kSharpeTolTable7b = 0.005;
constexpr double kOlsRecoveryTol = 1e-6;
constexpr double kRidgeOlsTol = 1e-8;
constexpr double kGridTol = 1e-6;
constexpr double kBudgetTol = 1e-6;
constexpr double kAccountingTol = 1e-6;
constexpr double kJaccardMin = 0.5;

struct Outcome {
  std::vector<std::string> failures;
  std::string detail;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void criterion(int id, const char* name, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) o.failures.push_back("runtime " + std::to_string(secs) + " s over budget");
  const bool pass = o.failures.empty();
  std::printf("%s criterion %d: %s (%.2f s / %.0f s budget)%s%s\n", pass ? "PASS" : "FAIL", id, name, secs, budget_s,
              o.detail.empty() ? "" : " ", o.detail.c_str());
  std::size_t shown = 0;
  for (const auto& f : o.failures) {
    if (++shown > 20) {
      std::printf("    ... %zu more\n", o.failures.size() - 20);
      break;
    }
    std::printf("    %s\n", f.c_str());
  }
  std::fflush(stdout);
  if (!pass) ++g_failed;
}

std::string num(double v) { return csv::format_number(v); }

// ---------------------------------------------------------------------------

void sharpe_arithmetic(Outcome& o) {
  struct Row {
    double ret, sd, rf, expect, tol, paper;
  };
  const Row rows[] = {{0.1329, 0.129, 0.015, 0.914, kSharpeTolTable7a, 0.917},
                      {0.0522, 0.191, 0.015, 0.195, kSharpeTolTable8, 0.195},
                      {0.0712, 0.138, 0.015, 0.407, kSharpeTolTable7b, 0.406}};
  for (const auto& r : rows) {
    auto s = sharpe_ratio(r.ret, r.sd, r.rf);
    o.expect(s.has_value(), "sharpe undefined for " + num(r.ret));
    if (!s) continue;
    o.expect(std::abs(*s - r.expect) <= r.tol, "sharpe(" + num(r.ret) + ", " + num(r.sd) + ") = " + num(*s));
    o.expect(std::abs(*s - r.paper) <= r.tol, "sharpe " + num(*s) + " vs published " + num(r.paper));
    o.detail += num(std::round(*s * 1000) / 1000) + " ";
  }
}

void model_selection(Outcome& o) {
  using models::ModelFamily;
  const double rows[5][5] = {{0.02238, 0.02161, 0.02205, 0.02180, 0.02443},
                             {0.01908, 0.01870, 0.01841, 0.01828, 0.02098},
                             {0.01852, 0.01820, 0.01855, 0.01641, 0.01996},
                             {0.02040, 0.01981, 0.01879, 0.01822, 0.02192},
                             {0.02442, 0.02394, 0.02340, 0.01885, 0.02210}};
  const char* dates[5] = {"19950601", "19950901", "19951201", "19960301", "19960603"};
  const ModelFamily expect[5] = {ModelFamily::kRidge, ModelFamily::kRandomForest, ModelFamily::kRandomForest,
                                 ModelFamily::kRandomForest, ModelFamily::kRandomForest};
  for (int r = 0; r < 5; ++r) {
    std::vector<ModelScore> s;
    for (int k = 0; k < 5; ++k) s.push_back({models::kAllFamilies[std::size_t(k)], rows[r][k]});
    const auto got = select_model(s);
    o.expect(got == expect[r], std::string(dates[r]) + ": chose " + std::string(models::family_name(got)));
  }
}

void top_quintile(Outcome& o) {
  // Ridge column of the Energy table; the other 40 sector members rank below it.
  std::vector<Pick> preds = {{"WMB", 0.0924}, {"OKE", 0.0742}, {"RRC", 0.0374}, {"PXD", 0.0366}, {"VLO", 0.0347},
                             {"EQT", 0.0234}, {"HES", 0.0161}, {"BHI", 0.0115}, {"MUR", 0.0101}, {"NE", 0.0094}};
  for (int i = 0; i < 40; ++i) preds.push_back({"E" + std::to_string(100 + i), 0.0090 - 0.0005 * i});
  Rng rng(3);
  for (std::size_t i = preds.size(); i > 1; --i) std::swap(preds[i - 1], preds[rng.index(i)]);
  const auto picks = pick_top(preds, 0.2);
  const std::set<std::string> expect = {"WMB", "OKE", "RRC", "PXD", "VLO", "EQT", "HES", "BHI", "MUR", "NE"};
  std::set<std::string> got;
  for (const auto& p : picks) got.insert(p.ticker);
  o.expect(picks.size() == 10, "picked " + std::to_string(picks.size()) + " of 50");
  o.expect(got == expect, "pick set differs");
  for (std::size_t i = 1; i < picks.size(); ++i)
    o.expect(picks[i - 1].predicted_return >= picks[i].predicted_return, "picks not in descending order");
}

// ---------------------------------------------------------------------------

struct Regression {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, beta;
  double intercept = 0.3;
};

Regression regression(int n, int p, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Regression r;
  r.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) r.x(i, j) = rng.normal();
  r.beta.resize(p);
  for (int j = 0; j < p; ++j) r.beta(j) = rng.uniform() * 2.0 - 1.0;
  r.y = (r.x * r.beta).array() + r.intercept;
  for (int i = 0; i < n; ++i) r.y(i) += sigma * rng.normal();
  return r;
}

std::vector<std::string> names_for(int p) {
  std::vector<std::string> n;
  for (int j = 0; j < p; ++j) n.push_back("x" + std::to_string(j + 1));
  return n;
}

void regression_suite(Outcome& o) {
  using namespace models;
  {
    auto r = regression(200, 20, 0.0, 101);
    auto lp = fit_ols(r.x, r.y, names_for(20));
    double worst = std::abs(lp.intercept - r.intercept);
    for (int j = 0; j < 20; ++j) worst = std::max(worst, std::abs(lp.coefficients[std::size_t(j)] - r.beta(j)));
    o.expect(worst <= kOlsRecoveryTol, "ols recovery error " + num(worst));
    o.detail += "ols err " + num(worst) + ";";
  }
  {
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto r = regression(150, 12, 0.3, seed);
      auto a = fit_ols(r.x, r.y, names_for(12));
      auto b = fit_ridge(r.x, r.y, names_for(12), 0.0);
      worst = std::max(worst, std::abs(a.intercept - b.intercept));
      for (std::size_t j = 0; j < 12; ++j) worst = std::max(worst, std::abs(a.coefficients[j] - b.coefficients[j]));
    }
    o.expect(worst <= kRidgeOlsTol, "ridge(0) vs ols " + num(worst));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = regression(80, 15, 1.0, 200 + seed);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 25; ++k) {
      const double lambda = std::pow(10.0, -4.0 + 6.0 * k / 24.0);
      auto lp = fit_ridge(r.x, r.y, names_for(15), lambda);
      double norm = 0;
      for (double b : lp.standardized) norm += b * b;
      norm = std::sqrt(norm);
      o.expect(norm <= prev * (1 + 1e-12), "ridge norm rises at lambda " + num(lambda));
      prev = norm;
    }
  }
  std::size_t steps = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed * 104729);
    const int n = 40 + int(rng.index(100)), p = 3 + int(rng.index(18));
    auto r = regression(n, p, 0.0, 300 + seed);
    for (int j = 0; j < p; ++j)
      if (rng.uniform() < 0.5) r.beta(j) = 0.0;
    r.y = (r.x * r.beta).array() + r.intercept;
    for (int i = 0; i < n; ++i) r.y(i) += (0.5 + rng.uniform()) * rng.normal();
    auto lp = fit_stepwise_aic(r.x, r.y, names_for(p));
    for (std::size_t s = 1; s < lp.aic_path.size(); ++s) {
      ++steps;
      o.expect(lp.aic_path[s] < lp.aic_path[s - 1], "stepwise seed " + std::to_string(seed) + " step " +
                                                          std::to_string(s) + " does not decrease AIC");
    }
  }
  o.detail += " stepwise steps " + std::to_string(steps) + ";";
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto r = regression(60 + int(seed) * 5, 20, 0.5, 400 + seed);
    const double var = (r.y.array() - r.y.mean()).square().mean();
    for (auto fam : {ModelFamily::kRandomForest, ModelFamily::kGbm}) {
      auto spec = ModelSpec::defaults(fam, seed);
      if (fam == ModelFamily::kRandomForest) spec = spec.with("trees", 100);
      if (fam == ModelFamily::kGbm) spec = spec.with("stages", 200);
      auto m = fit(spec, names_for(20), r.x, r.y);
      const double train = mse(predict(m, names_for(20), r.x), r.y);
      o.expect(train <= var, std::string(family_name(fam)) + " seed " + std::to_string(seed) + ": mse " +
                                 num(train) + " > var " + num(var));
    }
  }
}

// ---------------------------------------------------------------------------

bool weights_valid(const Eigen::VectorXd& w, double ub) {
  if (std::abs(w.sum() - 1.0) > kBudgetTol) return false;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w(i) >= 0.0 && w(i) <= ub)) return false;
  return true;
}

void qp_suite(Outcome& o) {
  const double rf = 0.015;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    Rng rng(seed * 7 + 1);
    Eigen::MatrixXd a(3, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 0.01 * rng.normal();
    const Eigen::MatrixXd sigma = a * a.transpose() + 1e-6 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd mu(3);
    for (int i = 0; i < 3; ++i) mu(i) = -0.02 + 0.1 * rng.uniform();
    mu(Eigen::Index(rng.index(3))) = 0.03 + 0.05 * rng.uniform();
    const double caps[] = {0.5, 0.6, 1.0};
    const double ub = caps[rng.index(3)];

    auto mv = min_variance(sigma, ub);
    auto ms = max_sharpe(mu, sigma, rf, ub);
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    o.expect(weights_valid(mv.weights, ub), tag + "min_variance weights invalid");
    o.expect(weights_valid(ms.weights, ub), tag + "max_sharpe weights invalid");
    const double v = mv.weights.dot(sigma * mv.weights);
    const double s = portfolio_sharpe(ms.weights, mu, sigma, rf);
    double best_v = std::numeric_limits<double>::infinity(), best_s = -best_v;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; i + j <= 100; ++j) {
        Eigen::Vector3d w(i / 100.0, j / 100.0, (100 - i - j) / 100.0);
        if (w.maxCoeff() > ub + 1e-12) continue;
        best_v = std::min(best_v, w.dot(sigma * w));
        best_s = std::max(best_s, portfolio_sharpe(w, mu, sigma, rf));
      }
    o.expect(v <= best_v + kGridTol, tag + "variance " + num(v) + " above grid " + num(best_v));
    o.expect(s >= best_s - kGridTol, tag + "sharpe " + num(s) + " below grid " + num(best_s));
  }
  for (int n : {2, 3, 5, 25}) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n) * 1e-4;
    const double ub = weight_cap(std::size_t(n), 0.05);
    auto mv = min_variance(eye, std::max(ub, 0.5));
    auto ms = max_sharpe(Eigen::VectorXd::Constant(n, 0.03), eye, rf, std::max(ub, 0.5));
    for (int i = 0; i < n; ++i) {
      o.expect(std::abs(mv.weights(i) - 1.0 / n) <= 1e-9, "identity min_variance n=" + std::to_string(n));
      o.expect(std::abs(ms.weights(i) - 1.0 / n) <= 1e-6, "identity max_sharpe n=" + std::to_string(n));
    }
  }
}

// ---------------------------------------------------------------------------

PricePanel random_walks(const std::vector<std::string>& names, Date from, Date to, std::uint64_t seed) {
  Rng rng(seed);
  PricePanel panel;
  for (const auto& n : names) {
    double p = 20.0 + 80.0 * rng.uniform();
    std::vector<std::pair<Date, double>> obs;
    for (Date d = from; d <= to; d += std::chrono::days{1})
      if (is_weekday(d)) {
        p *= std::exp(0.0003 + 0.015 * rng.normal());
        obs.emplace_back(d, p);
      }
    panel[n] = PriceSeries(n, obs);
  }
  return panel;
}

std::vector<PortfolioWeights> schedule(const std::vector<std::string>& names, const TradingDays& days, Date first,
                                       Date last, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PortfolioWeights> out;
  for (Date anchor = first; anchor <= last; anchor = add_months(anchor, 3)) {
    PortfolioWeights pw;
    pw.trade_date = *days.on_or_after(anchor);
    double total = 0;
    for (const auto& n : names)
      if (rng.uniform() < 0.7) {
        pw.tickers.push_back(n);
        pw.weights.push_back(0.2 + rng.uniform());
        total += pw.weights.back();
      }
    if (pw.tickers.empty()) pw.tickers = {names.front()}, pw.weights = {1.0}, total = 1.0;
    for (auto& w : pw.weights) w /= total;
    out.push_back(std::move(pw));
  }
  return out;
}

void accounting_suite(Outcome& o) {
  o.expect(transaction_cost(0.0, 50.0) == 0.0, "zero trade costs something");
  o.expect(std::abs(transaction_cost(100.0, 50.0) - 5.00) < 1e-12,
           "100 shares at 50 cost " + num(transaction_cost(100.0, 50.0)));

  const Date from = make_date(2010, 1, 1), to = make_date(2012, 12, 31);
  const auto days = TradingDays::weekdays(from, to);
  const std::vector<std::string> names = {"A", "B", "C", "D", "E", "F"};
  const auto panel = random_walks(names, from, to, 77);
  const auto sched = schedule(names, days, make_date(2010, 3, 1), make_date(2012, 9, 1), 78);
  auto r = run_backtest(sched, panel, days, to);
  o.expect(r.curve.size() > 700, "short curve");

  // Replay shares from the blotter and value the book each day.
  std::map<std::string, double> shares;
  double cash = 1e6, worst = 0.0;
  std::size_t b = 0;
  std::map<std::string, double> last_price;
  for (const auto& pt : r.curve) {
    while (b < r.blotter.size() && r.blotter[b].date <= pt.date) {
      const auto& row = r.blotter[b++];
      shares[row.ticker] += row.share_delta;
      cash -= row.share_delta * row.price + row.cost;
    }
    double value = cash;
    for (const auto& [t, q] : shares) {
      if (auto p = panel.at(t).on(pt.date)) last_price[t] = *p;
      value += q * last_price[t];
    }
    worst = std::max(worst, std::abs(value - pt.value));
    o.expect(pt.value > 0.0, "non-positive value");
  }
  o.expect(worst <= kAccountingTol, "daily identity residual " + num(worst));
  auto chk = verify_accounting(r, panel, 1e6);
  o.expect(chk.max_daily_residual <= kAccountingTol, "library replay residual " + num(chk.max_daily_residual));
  o.expect(chk.min_cash >= -kAccountingTol, "negative cash " + num(chk.min_cash));
  o.detail += "identity residual " + num(worst) + ";";

  PricePanel flat;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<std::pair<Date, double>> obs;
    for (Date d : days.between(from, to)) obs.emplace_back(d, 10.0 + 7.0 * double(k));
    flat[names[k]] = PriceSeries(names[k], obs);
  }
  auto f = run_backtest(sched, flat, days, to);
  double blotter_cost = 0;
  for (const auto& row : f.blotter) blotter_cost += row.cost;
  const double leakage = 1e6 - f.curve.back().value;
  o.expect(std::abs(leakage - blotter_cost) <= kAccountingTol,
           "flat leakage " + num(leakage) + " vs blotter " + num(blotter_cost));
  o.detail += " flat leakage " + num(leakage);
}

// ---------------------------------------------------------------------------

struct RunDirs {
  fs::path synth, a, b;
  bool ok = false;
};

std::map<std::string, std::string> index_by(const csv::Table& t, const std::vector<std::string>& keys,
                                            const std::string& value, const std::string& src) {
  std::vector<std::size_t> idx;
  for (const auto& k : keys) idx.push_back(t.column(k, src));
  const auto vi = t.column(value, src);
  std::map<std::string, std::string> out;
  for (const auto& row : t.rows) {
    std::string key;
    for (auto i : idx) key += row.cells[i] + "|";
    out[key] = row.cells[vi];
  }
  return out;
}

void end_to_end(Outcome& o, RunDirs& dirs, const fs::path& data, const fs::path& work) {
  dirs.synth = work / "synth";
  dirs.a = work / "run_a";
  dirs.b = work / "run_b";
  fs::remove_all(work);
  fs::create_directories(work);
  write_synthetic(generate_synthetic(load_synth_config(data / "synth_small.conf")), dirs.synth);
  fs::copy_file(data / "run_small.conf", work / "run_small.conf");
  const auto cfg = load_run_config(work / "run_small.conf");

  const auto t0 = std::chrono::steady_clock::now();
  cmd_run(cfg, dirs.a);
  const double first = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cmd_run(cfg, dirs.b);
  dirs.ok = true;
  o.detail += "run " + num(std::round(first * 10) / 10) + " s;";
  o.expect(first <= 600.0, "single run took " + num(first) + " s");

  for (std::size_t i = 0; i < kRunFilesCount; ++i) {
    const std::string f = kRunFiles[i];
    o.expect(csv::read_text(dirs.a / f) == csv::read_text(dirs.b / f), f + " differs between same-seed runs");
  }

  // Jaccard overlap against the planted top quintile, per (trade date, sector).
  const auto truth = nlohmann::json::parse(csv::read_text(dirs.synth / "truth.json"));
  std::map<std::string, std::set<std::string>> expect, got;
  for (const auto& t : truth.at("top_quintile")) {
    auto& s = expect[t.at("trade_date").get<std::string>() + "|" + std::to_string(t.at("sector").get<int>())];
    for (const auto& tk : t.at("tickers")) s.insert(tk.get<std::string>());
  }
  const auto recs = csv::read_file(dirs.a / "recommendations.csv");
  const std::string rsrc = "recommendations.csv";
  const auto cd = recs.column("trade_date", rsrc), cs = recs.column("sector", rsrc), ct = recs.column("ticker", rsrc);
  for (const auto& row : recs.rows) got[row.cells[cd] + "|" + row.cells[cs]].insert(row.cells[ct]);
  double total = 0;
  std::size_t count = 0;
  for (const auto& [key, picks] : got) {
    auto it = expect.find(key);
    o.expect(it != expect.end(), "no truth set for " + key);
    if (it == expect.end()) continue;
    std::size_t inter = 0;
    for (const auto& t : picks) inter += it->second.count(t);
    const std::size_t uni = picks.size() + it->second.size() - inter;
    total += uni ? double(inter) / double(uni) : 1.0;
    ++count;
  }
  o.expect(count > 0, "no recommendations");
  const double avg = count ? total / double(count) : 0.0;
  o.expect(avg >= kJaccardMin, "average jaccard " + num(avg));
  o.detail += " jaccard " + num(std::round(avg * 1000) / 1000) + " over " + std::to_string(count) + ";";

  // Weight histories for all three methods.
  const auto w = csv::read_file(dirs.a / "weights.csv");
  const std::string wsrc = "weights.csv";
  const auto wd = w.column("trade_date", wsrc), wm = w.column("method", wsrc), wv = w.column("weight", wsrc);
  std::map<std::string, std::map<std::string, std::vector<double>>> by;
  for (const auto& row : w.rows) by[row.cells[wm]][row.cells[wd]].push_back(*csv::parse_number(row.cells[wv]));
  const auto dates = recs.rows.empty() ? std::set<std::string>{} : [&] {
    std::set<std::string> s;
    for (const auto& row : recs.rows) s.insert(row.cells[cd]);
    return s;
  }();
  for (const char* m : {"mean_var", "equal", "min_var"}) {
    o.expect(by.count(m) == 1, std::string("no weights for ") + m);
    if (!by.count(m)) continue;
    o.expect(by[m].size() == dates.size(), std::string(m) + ": " + std::to_string(by[m].size()) +
                                               " weight dates vs " + std::to_string(dates.size()) + " trade dates");
    for (const auto& [d, ws] : by[m]) {
      const double ub = std::max(0.05, 1.0 / double(ws.size()));
      double sum = 0;
      for (double v : ws) {
        o.expect(v >= 0.0 && v <= ub + 1e-12, std::string(m) + " " + d + ": weight " + num(v) + " outside [0, ub]");
        sum += v;
      }
      o.expect(std::abs(sum - 1.0) <= kBudgetTol, std::string(m) + " " + d + ": weights sum to " + num(sum));
    }
  }
  const auto rep = nlohmann::json::parse(csv::read_text(dirs.a / "report.json"));
  o.expect(rep.at("checks").at("all_passed").get<bool>(), "report.json invariant checks failed");
}

// Independent of the pipeline's own bookkeeping: recompute from the emitted files.
void leakage_audit(Outcome& o, const RunDirs& dirs) {
  o.expect(dirs.ok, "end-to-end run did not complete");
  if (!dirs.ok) return;
  const auto fund = csv::read_file(dirs.synth / "fundamentals.csv");
  const std::string fsrc = "fundamentals.csv";
  const auto ft = fund.column("ticker", fsrc), fq = fund.column("quarter_end", fsrc),
             fr = fund.column("release_date", fsrc);
  std::map<std::string, std::set<std::string>> releases;
  for (const auto& row : fund.rows) releases[row.cells[ft] + "|" + row.cells[fq]].insert(row.cells[fr]);

  const auto audit = csv::read_file(dirs.a / "audit_rows.csv");
  const std::string asrc = "audit_rows.csv";
  const auto ctd = audit.column("trade_date", asrc), ctk = audit.column("ticker", asrc),
             cq = audit.column("quarter_end", asrc), crole = audit.column("role", asrc),
             crel = audit.column("release_date", asrc), creal = audit.column("realization_date", asrc);
  std::map<std::string, std::size_t> roles;
  std::size_t violations = 0;
  auto flag = [&](const std::string& what) {
    ++violations;
    o.failures.push_back(what);
  };
  for (const auto& row : audit.rows) {
    const auto& role = row.cells[crole];
    ++roles[role];
    const Date trade = parse_date(row.cells[ctd]);
    const Date release = parse_date(row.cells[crel]);
    const Date qend = parse_date(row.cells[cq]);
    const std::string where = "line " + std::to_string(row.line) + " (" + row.cells[ctk] + " " + row.cells[cq] + ")";
    auto rel = releases.find(row.cells[ctk] + "|" + row.cells[cq]);
    if (rel == releases.end() || !rel->second.count(row.cells[crel])) flag(where + ": release date not in fundamentals");
    if (release > trade) flag(where + ": released " + row.cells[crel] + " after trade " + row.cells[ctd]);
    if (role == "predict") continue;
    if (row.cells[creal].empty()) {
      flag(where + ": " + role + " row without a realization date");
      continue;
    }
    const Date realized = parse_date(row.cells[creal]);
    // The return window opens two months after the quarter and spans a further quarter.
    const Date earliest = add_months(qend + std::chrono::days{1}, 5);
    if (realized < earliest) flag(where + ": realization " + row.cells[creal] + " precedes its window end");
    if (realized > trade) flag(where + ": realized " + row.cells[creal] + " after trade " + row.cells[ctd]);
  }
  o.expect(roles["train"] > 0 && roles["test"] > 0 && roles["predict"] > 0, "audit log lacks a role");
  o.detail = std::to_string(audit.rows.size()) + " rows, " + std::to_string(violations) + " violations";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dynrec_acceptance";
  const fs::path data = DYNREC_TEST_DATA;
  set_console_level(spdlog::level::warn);

  criterion(1, "Sharpe arithmetic reproduction", 1, sharpe_arithmetic);
  criterion(2, "model-selection reproduction", 1, model_selection);
  criterion(3, "top-20% reproduction", 1, top_quintile);
  criterion(4, "regression oracle suite", 120, regression_suite);
  criterion(5, "QP oracle suite", 300, qp_suite);
  criterion(6, "transaction-cost and accounting suite", 60, accounting_suite);
  RunDirs dirs;
  // Two full runs back to back.
  criterion(7, "end-to-end signal recovery", 1200, [&](Outcome& o) { end_to_end(o, dirs, data, work); });
  criterion(8, "leakage audit", 60, [&](Outcome& o) { leakage_audit(o, dirs); });

  std::printf("%s: %d criterion(s) failed\n", g_failed ? "FAIL" : "PASS", g_failed);
  return g_failed ? 1 : 0;
}
