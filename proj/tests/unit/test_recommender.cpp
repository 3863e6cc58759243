#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "fixtures.hpp"
#include "recommender.hpp"

using namespace dynrec;
using models::kAllFamilies;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ModelScore> scores_of(std::initializer_list<double> mse) {
  std::vector<ModelScore> out;
  std::size_t i = 0;
  for (double v : mse) out.push_back({kAllFamilies[i++], v});
  return out;
}

FactorPanel panel_from(int sector, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& prefix) {
  FactorPanel p;
  p.sector = sector;
  p.factor_names = fx::column_names(int(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    PanelRow r;
    r.ticker = prefix + std::to_string(1000 + i);
    r.quarter = make_date(2010, 3, 31);
    for (Eigen::Index j = 0; j < x.cols(); ++j) r.x.push_back(x(i, j));
    r.fwd_return = y(i);
    p.rows.push_back(std::move(r));
  }
  return p;
}

SectorData sector_data(int sector, std::uint64_t seed, int stocks = 12, double noise = 0.05) {
  auto train = fx::random_regression(80, 20, noise, seed);
  auto test = fx::random_regression(40, 20, 0.05, seed + 1000);
  test.beta = train.beta;
  test.y = (test.x * train.beta).array() + train.intercept;
  auto pred = fx::random_regression(stocks, 20, 0.0, seed + 2000);
  SectorData d;
  d.sector = sector;
  d.train = panel_from(sector, train.x, train.y, "TR");
  d.test = panel_from(sector, test.x, test.y, "TE");
  d.predict = panel_from(sector, pred.x, pred.x * train.beta, "S" + std::to_string(sector) + "_");
  return d;
}

RecommenderOptions fast_options(std::uint64_t seed) {
  auto opt = default_recommender_options(seed);
  for (auto& s : opt.specs) {
    if (s.family == models::ModelFamily::kRandomForest) s = s.with("trees", 40);
    if (s.family == models::ModelFamily::kGbm) s = s.with("stages", 100);
  }
  return opt;
}

RebalanceEvent event_at(Date trade) {
  RebalanceEvent e;
  e.index = 3;
  e.trade_date = trade;
  return e;
}

}  // namespace

TEST_CASE("select_model reproduces the Energy selections") {
  // Rows in priority order: ols, ridge, stepwise, forest, gbm.
  CHECK(select_model(scores_of({0.02238, 0.02161, 0.02205, 0.02180, 0.02443})) == models::ModelFamily::kRidge);
  CHECK(select_model(scores_of({0.01908, 0.01870, 0.01841, 0.01828, 0.02098})) == models::ModelFamily::kRandomForest);
  CHECK(select_model(scores_of({0.01852, 0.01820, 0.01855, 0.01641, 0.01996})) == models::ModelFamily::kRandomForest);
  CHECK(select_model(scores_of({0.02040, 0.01981, 0.01879, 0.01822, 0.02192})) == models::ModelFamily::kRandomForest);
  CHECK(select_model(scores_of({0.02442, 0.02394, 0.02340, 0.01885, 0.02210})) == models::ModelFamily::kRandomForest);
}

TEST_CASE("select_model tie-breaks, errors and order invariance") {
  CHECK(select_model(scores_of({0.1, 0.1, 0.1, 0.1, 0.1})) == models::ModelFamily::kOls);
  CHECK(select_model(scores_of({0.2, 0.1, 0.2, 0.1, 0.1})) == models::ModelFamily::kRidge);
  CHECK(select_model(scores_of({kInf, kInf, 0.3, kInf, 0.3})) == models::ModelFamily::kStepwiseAic);
  CHECK_THROWS_AS(select_model(scores_of({0.1, std::nan(""), 0.2, 0.3, 0.4})), Error);
  CHECK_THROWS_AS(select_model(scores_of({kInf, kInf, kInf, kInf, kInf})), Error);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ModelScore> s;
    for (auto f : kAllFamilies) s.push_back({f, double(rng.index(4)) * 0.01});
    const auto expect = select_model(s);
    const auto ranked = rank_models(s);
    for (int k = 0; k < 10; ++k) {
      for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.index(i)]);
      CHECK(select_model(s) == expect);
      CHECK(rank_models(s) == ranked);
    }
    CHECK(ranked.front() == expect);
  }
}

TEST_CASE("rank_models orders by error then priority and drops failures") {
  auto r = rank_models(scores_of({0.3, kInf, 0.1, 0.3, 0.2}));
  CHECK(r == std::vector<models::ModelFamily>{models::ModelFamily::kStepwiseAic, models::ModelFamily::kGbm,
                                              models::ModelFamily::kOls, models::ModelFamily::kRandomForest});
}

TEST_CASE("selection indicator marks exactly the chosen family") {
  SelectionRecord rec;
  rec.scores = scores_of({0.3, 0.2, 0.1, 0.4, 0.5});
  rec.chosen = models::ModelFamily::kStepwiseAic;
  auto ind = rec.indicator();
  CHECK(ind == std::vector<int>{0, 0, 1, 0, 0});
}

TEST_CASE("pick_top reproduces the Energy top quintile") {
  std::vector<Pick> preds = {{"WMB", 9.24}, {"OKE", 7.42}, {"RRC", 3.74}, {"PXD", 3.66}, {"VLO", 3.47},
                             {"EQT", 2.34}, {"HES", 1.61}, {"BHI", 1.15}, {"MUR", 1.01}, {"NE", 0.94}};
  for (int i = 0; i < 40; ++i) preds.push_back({"F" + std::to_string(100 + i), 0.90 - 0.01 * i});
  std::reverse(preds.begin(), preds.end());
  auto picks = pick_top(preds, 0.2);
  REQUIRE(picks.size() == 10);
  const std::vector<std::string> expect = {"WMB", "OKE", "RRC", "PXD", "VLO", "EQT", "HES", "BHI", "MUR", "NE"};
  for (std::size_t i = 0; i < 10; ++i) CHECK(picks[i].ticker == expect[i]);
}

TEST_CASE("pick_top counting and tie rules") {
  CHECK(pick_top({{"A", 1}, {"B", 2}, {"C", 3}}, 0.2).size() == 1);
  CHECK(pick_top({{"A", 1}, {"B", 2}, {"C", 3}}, 0.2)[0].ticker == "C");
  std::vector<Pick> flat;
  for (const char* t : {"J", "C", "H", "A", "E", "G", "B", "I", "D", "F"}) flat.push_back({t, 0.5});
  auto p = pick_top(flat, 0.2);
  REQUIRE(p.size() == 2);
  CHECK(p[0].ticker == "A");
  CHECK(p[1].ticker == "B");
  // Round half up: 0.2 * 13 = 2.6 -> 3, 0.2 * 12 = 2.4 -> 2, 0.5 * 5 = 2.5 -> 3.
  std::vector<Pick> many;
  for (int i = 0; i < 13; ++i) many.push_back({"T" + std::to_string(i), double(i)});
  CHECK(pick_top(many, 0.2).size() == 3);
  many.pop_back();
  CHECK(pick_top(many, 0.2).size() == 2);
  many.resize(5);
  CHECK(pick_top(many, 0.5).size() == 3);
  CHECK(pick_top(many, 1.0).size() == 5);
}

TEST_CASE("pick_top properties") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<Pick> preds;
    for (std::size_t i = 0; i < n; ++i) preds.push_back({"T" + std::to_string(i), double(rng.index(8)) * 0.01});
    auto full = pick_top(preds, 1.0);
    REQUIRE(full.size() == n);
    for (std::size_t i = 1; i < n; ++i) {
      CHECK(full[i - 1].predicted_return >= full[i].predicted_return);
      if (full[i - 1].predicted_return == full[i].predicted_return) CHECK(full[i - 1].ticker < full[i].ticker);
    }
    const double fraction = 0.05 + rng.uniform() * 0.95;
    auto top = pick_top(preds, fraction);
    REQUIRE(top.size() <= n);
    CHECK(top.size() >= 1);
    for (std::size_t i = 0; i < top.size(); ++i) CHECK(top[i].ticker == full[i].ticker);
    // Same picks regardless of input order.
    auto shuffled = preds;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    auto again = pick_top(shuffled, fraction);
    REQUIRE(again.size() == top.size());
    for (std::size_t i = 0; i < top.size(); ++i) CHECK(again[i].ticker == top[i].ticker);
    // A dominated newcomer that leaves the count unchanged leaves the set unchanged.
    auto bigger = preds;
    bigger.push_back({"ZZZ_LOW", -1.0});
    auto with_low = pick_top(bigger, fraction);
    if (with_low.size() == top.size())
      for (std::size_t i = 0; i < top.size(); ++i) CHECK(with_low[i].ticker == top[i].ticker);
  }
}

TEST_CASE("sanity_check") {
  models::FittedModel m;
  m.spec = ModelSpec::defaults(models::ModelFamily::kRidge);
  m.factor_names.assign(factor_names().begin(), factor_names().end());
  models::LinearParams lp;
  lp.intercept = 0.049237;
  const std::map<std::string, double> table_v = {
      {"ROA", 0.205677},  {"GPM", 0.116841},  {"REVGH", 0.081318}, {"NPM", 0.015640},  {"CR", 0.004123},
      {"EPS", 0.002562},  {"QR", 0.002322},   {"DE", 0.000612},    {"EVCFO", 0.000013}, {"DPO", 0.000004},
      {"DSI", -0.000018}, {"EM", -0.000405},  {"WCR", -0.000422},  {"PS", -0.002042},  {"PCFO", -0.003140},
      {"LTDTA", -0.026227}, {"PB", -0.032136}, {"OM", -0.055619},  {"ROE", -0.078489}};
  for (const auto& name : m.factor_names) {
    auto it = table_v.find(name);
    const double c = it == table_v.end() ? 0.0 : it->second;
    m.importances.push_back(c);
    if (it != table_v.end()) {
      lp.terms.push_back(name);
      lp.coefficients.push_back(c);
    }
  }
  m.params = lp;
  Rng rng(1);
  Eigen::MatrixXd test_x(10, 20);
  for (Eigen::Index i = 0; i < test_x.size(); ++i) test_x.data()[i] = rng.normal();

  SUBCASE("coefficients shaped like the ridge table are fine") {
    auto r = sanity_check(m, &test_x);
    CHECK(r.ok);
    CHECK(inspect(m).size() == 20);
  }
  SUBCASE("all zero is abnormal") {
    for (auto& v : m.importances) v = 0.0;
    std::get<models::LinearParams>(m.params).coefficients.assign(lp.terms.size(), 0.0);
    auto r = sanity_check(m, &test_x);
    CHECK_FALSE(r.ok);
    CHECK_FALSE(r.reason.empty());
  }
  SUBCASE("non-finite is abnormal") {
    m.importances[3] = std::nan("");
    CHECK_FALSE(sanity_check(m).ok);
  }
  SUBCASE("constant predictions over a varying design are abnormal") {
    models::FittedModel c = m;
    models::LinearParams z;
    z.intercept = 0.02;
    z.terms = {"ROA"};
    z.coefficients = {1e-300};
    c.params = z;
    CHECK_FALSE(sanity_check(c, &test_x).ok);
  }
}

TEST_CASE("score_models with a constant target scores zero everywhere") {
  auto r = fx::random_regression(60, 5, 0.0, 2);
  r.y.setConstant(0.02);
  auto panel = panel_from(10, r.x, r.y, "C");
  auto scores = score_models(panel, panel, fast_options(1).specs);
  REQUIRE(scores.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(scores[i].family == kAllFamilies[i]);
    CHECK(scores[i].mse < 1e-14);
  }
}

TEST_CASE("score_models ignores test row order") {
  auto d = sector_data(20, 5);
  auto specs = fast_options(2).specs;
  auto a = score_models(d.train, d.test, specs);
  std::reverse(d.test.rows.begin(), d.test.rows.end());
  std::rotate(d.test.rows.begin(), d.test.rows.begin() + 7, d.test.rows.end());
  auto b = score_models(d.train, d.test, specs);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].mse == doctest::Approx(b[i].mse).epsilon(1e-12));
}

TEST_CASE("score_models attaches the family to errors or tolerates them") {
  auto r = fx::random_regression(10, 20, 0.1, 3);
  auto small = panel_from(10, r.x, r.y, "X");
  std::vector<ModelSpec> specs = {ModelSpec::defaults(models::ModelFamily::kOls),
                                  ModelSpec::defaults(models::ModelFamily::kRidge)};
  CHECK_THROWS_WITH_AS(score_models(small, small, specs), doctest::Contains("ols"), Error);
  auto s = score_models(small, small, specs, nullptr, true);
  CHECK(std::isinf(s[0].mse));
  CHECK(std::isfinite(s[1].mse));
}

TEST_CASE("recommend covers every sector and merges in sector order") {
  std::vector<SectorData> sectors;
  for (auto it = kGicsSectors.rbegin(); it != kGicsSectors.rend(); ++it)
    sectors.push_back(sector_data(*it, std::uint64_t(*it), 10, 1e-3));
  auto opt = fast_options(9);
  opt.specs.resize(3);  // linear families keep the eleven-sector run quick
  auto out = recommend(event_at(make_date(2010, 9, 1)), sectors, opt);
  REQUIRE(out.size() == 11);
  for (std::size_t i = 0; i < 11; ++i) {
    const auto& o = out[i];
    CHECK(o.recommendation.sector == kGicsSectors[i]);
    CHECK(o.selection.sector == kGicsSectors[i]);
    CHECK(o.recommendation.trade_date == make_date(2010, 9, 1));
    CHECK(o.recommendation.picks.size() == 2);
    CHECK(o.selection.chosen == select_model(o.selection.scores));
    auto ind = o.selection.indicator();
    CHECK(std::accumulate(ind.begin(), ind.end(), 0) == 1);
    CHECK(o.recommendation.model_used == o.selection.model_used);
    // Noise-free prediction rows: the picks are the true top two.
    std::vector<Pick> truth;
    for (const auto& r : sectors[10 - i].predict.rows) truth.push_back({r.ticker, r.fwd_return});
    auto best = pick_top(truth, 0.2);
    std::set<std::string> got, want;
    for (auto& p : o.recommendation.picks) got.insert(p.ticker);
    for (auto& p : best) want.insert(p.ticker);
    CHECK(jaccard(got, want) == 1.0);
  }
  SUBCASE("sequential and parallel runs agree") {
    opt.parallel = false;
    auto seq = recommend(event_at(make_date(2010, 9, 1)), sectors, opt);
    REQUIRE(seq.size() == out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      REQUIRE(seq[i].recommendation.picks.size() == out[i].recommendation.picks.size());
      for (std::size_t k = 0; k < seq[i].recommendation.picks.size(); ++k)
        CHECK(seq[i].recommendation.picks[k].predicted_return == out[i].recommendation.picks[k].predicted_return);
    }
  }
}

TEST_CASE("recommend skips empty sectors") {
  std::vector<SectorData> sectors = {sector_data(10, 1), sector_data(15, 2)};
  sectors[1].predict.rows.clear();
  auto opt = fast_options(1);
  opt.specs.resize(2);
  auto out = recommend(event_at(make_date(2010, 9, 1)), sectors, opt);
  REQUIRE(out.size() == 1);
  CHECK(out[0].recommendation.sector == 10);
}

TEST_CASE("an abnormal argmin model falls back to the next best") {
  // A forest that may not split predicts the training mean, which is exactly the test target,
  // so it wins on error but carries all-zero importances.
  auto train = fx::random_regression(50, 4, 0.5, 31);
  auto test = fx::random_regression(20, 4, 0.5, 32);
  test.y.setConstant(train.y.mean());
  SectorData d;
  d.sector = 25;
  d.train = panel_from(25, train.x, train.y, "A");
  d.test = panel_from(25, test.x, test.y, "B");
  d.predict = panel_from(25, test.x, test.y, "P");
  RecommenderOptions opt;
  opt.specs = {ModelSpec::defaults(models::ModelFamily::kOls),
               ModelSpec::defaults(models::ModelFamily::kRandomForest).with("trees", 3).with("min_leaf", 1000)};
  opt.parallel = false;
  auto out = recommend(event_at(make_date(2011, 3, 1)), {d}, opt);
  REQUIRE(out.size() == 1);
  const auto& sel = out[0].selection;
  CHECK(sel.chosen == models::ModelFamily::kRandomForest);
  CHECK(sel.model_used == models::ModelFamily::kOls);
  CHECK(sel.fallback_used);
  CHECK_FALSE(sel.fallback_reason.empty());
  CHECK(out[0].recommendation.model_used == models::ModelFamily::kOls);
}

TEST_CASE("jaccard") {
  CHECK(jaccard({"A", "B"}, {"B", "C"}) == doctest::Approx(1.0 / 3));
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard({"A"}, {}) == 0.0);
}
