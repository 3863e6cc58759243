#include "recommender.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>

#include "error.hpp"
#include "log.hpp"
#include "rng.hpp"

namespace dynrec {

std::vector<int> SelectionRecord::indicator() const {
  std::vector<int> out;
  for (const auto& s : scores) out.push_back(s.family == chosen ? 1 : 0);
  return out;
}

Design to_design(const FactorPanel& panel) {
  Design d;
  const auto n = Eigen::Index(panel.rows.size());
  const auto p = Eigen::Index(panel.factor_names.size());
  d.x.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = panel.rows[std::size_t(i)];
    for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = r.x[std::size_t(j)];
    d.y(i) = r.fwd_return;
  }
  return d;
}

std::vector<ModelScore> score_models(const FactorPanel& train, const FactorPanel& test,
                                     const std::vector<ModelSpec>& specs,
                                     std::vector<std::optional<FittedModel>>* fitted, bool tolerate) {
  if (train.rows.empty() || test.rows.empty())
    fail(ErrorKind::kInvalidArgument, "score_models: train and test panels must be nonempty");
  if (train.factor_names != test.factor_names)
    fail(ErrorKind::kInvalidArgument, "score_models: train and test factor columns differ");
  const Design tr = to_design(train);
  const Design te = to_design(test);
  std::vector<ModelScore> out;
  if (fitted) fitted->assign(specs.size(), std::nullopt);
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    try {
      FittedModel m = models::fit(spec, train.factor_names, tr.x, tr.y);
      Eigen::VectorXd pred = models::predict(m, test.factor_names, te.x);
      double score = models::mse(pred, te.y);
      if (!std::isfinite(score)) score = std::numeric_limits<double>::infinity();
      out.push_back({spec.family, score});
      if (fitted) (*fitted)[k] = std::move(m);
    } catch (const Error& e) {
      const std::string msg = std::string(models::family_name(spec.family)) + ": " + e.what();
      if (!tolerate) throw Error(e.kind(), msg);
      logger()->info("sector {}: {} (scored as +inf)", train.sector, msg);
      out.push_back({spec.family, std::numeric_limits<double>::infinity()});
    }
  }
  return out;
}

namespace {

int priority(ModelFamily f) {
  return int(std::find(models::kAllFamilies.begin(), models::kAllFamilies.end(), f) - models::kAllFamilies.begin());
}

}  // namespace

std::vector<ModelFamily> rank_models(std::span<const ModelScore> scores) {
  std::vector<ModelScore> s;
  for (const auto& sc : scores) {
    if (std::isnan(sc.mse))
      fail(ErrorKind::kInvalidArgument, "select_model: NaN score for " + std::string(models::family_name(sc.family)));
    if (std::isfinite(sc.mse)) s.push_back(sc);
  }
  std::sort(s.begin(), s.end(), [](const ModelScore& a, const ModelScore& b) {
    if (a.mse != b.mse) return a.mse < b.mse;
    return priority(a.family) < priority(b.family);
  });
  std::vector<ModelFamily> out;
  for (const auto& sc : s) out.push_back(sc.family);
  return out;
}

ModelFamily select_model(std::span<const ModelScore> scores) {
  auto ranked = rank_models(scores);
  if (ranked.empty()) fail(ErrorKind::kNumerical, "select_model: no family produced a finite score");
  return ranked.front();
}

std::vector<Pick> pick_top(std::vector<Pick> predictions, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorKind::kInvalidArgument, "pick fraction must be in (0, 1]");
  if (predictions.empty()) return {};
  std::sort(predictions.begin(), predictions.end(), [](const Pick& a, const Pick& b) {
    if (a.predicted_return != b.predicted_return) return a.predicted_return > b.predicted_return;
    return a.ticker < b.ticker;
  });
  const double exact = fraction * double(predictions.size());
  // Round half up, with slack for products like 0.2 * 50 landing a hair off an integer.
  auto count = std::size_t(std::floor(exact + 0.5 + 1e-9));
  count = std::clamp<std::size_t>(count, 1, predictions.size());
  predictions.resize(count);
  return predictions;
}

SanityResult sanity_check(const FittedModel& model, const Eigen::MatrixXd* test_x) {
  std::vector<double> values = model.importances;
  if (const auto* lp = model.linear()) values.push_back(lp->intercept);
  for (double v : values)
    if (!std::isfinite(v)) return {false, "non-finite coefficient or importance"};
  const bool all_zero = std::all_of(model.importances.begin(), model.importances.end(), [](double v) { return v == 0.0; });
  if (all_zero) return {false, "all coefficients/importances are zero"};
  if (test_x && test_x->rows() > 1) {
    bool varies = false;
    for (Eigen::Index j = 0; j < test_x->cols() && !varies; ++j)
      varies = test_x->col(j).maxCoeff() > test_x->col(j).minCoeff();
    if (varies) {
      Eigen::VectorXd pred = models::predict(model, model.factor_names, *test_x);
      if (!pred.allFinite()) return {false, "non-finite prediction"};
      const double spread = pred.maxCoeff() - pred.minCoeff();
      if (spread <= 1e-12 * (1.0 + pred.cwiseAbs().maxCoeff()))
        return {false, "constant predictions across a non-constant test design"};
    }
  }
  return {};
}

RecommenderOptions default_recommender_options(std::uint64_t seed) {
  RecommenderOptions o;
  for (auto f : models::kAllFamilies) o.specs.push_back(ModelSpec::defaults(f, seed));
  return o;
}

namespace {

std::optional<SectorOutcome> run_sector(const RebalanceEvent& event, const SectorData& data,
                                        const RecommenderOptions& opt) {
  if (data.train.rows.empty() || data.test.rows.empty() || data.predict.rows.empty()) {
    logger()->info("{} sector {}: empty panel (train {}, test {}, predict {}), skipped", format_date(event.trade_date),
                   data.sector, data.train.rows.size(), data.test.rows.size(), data.predict.rows.size());
    return std::nullopt;
  }
  std::vector<ModelSpec> specs = opt.specs;
  for (auto& s : specs) s.seed = derive_seed(s.seed, std::uint64_t(event.index), std::uint64_t(data.sector));

  std::vector<std::optional<FittedModel>> fitted;
  SectorOutcome out;
  auto& sel = out.selection;
  sel.trade_date = event.trade_date;
  sel.sector = data.sector;
  sel.scores = score_models(data.train, data.test, specs, &fitted, true);
  auto ranked = rank_models(sel.scores);
  if (ranked.empty()) {
    logger()->warn("{} sector {}: every model failed to fit, skipped", format_date(event.trade_date), data.sector);
    return std::nullopt;
  }
  sel.chosen = ranked.front();
  const Design test = to_design(data.test);
  const FittedModel* used = nullptr;
  for (auto fam : ranked) {
    std::size_t k = 0;
    while (specs[k].family != fam) ++k;
    auto verdict = sanity_check(*fitted[k], &test.x);
    if (verdict.ok) {
      used = &*fitted[k];
      sel.model_used = fam;
      break;
    }
    logger()->warn("{} sector {}: {} abnormal ({}), falling back", format_date(event.trade_date), data.sector,
                   models::family_name(fam), verdict.reason);
    if (sel.fallback_reason.empty()) sel.fallback_reason = verdict.reason;
  }
  if (!used) {
    logger()->warn("{} sector {}: no model passed the sanity check, skipped", format_date(event.trade_date), data.sector);
    return std::nullopt;
  }
  sel.fallback_used = sel.model_used != sel.chosen;
  if (!sel.fallback_used) sel.fallback_reason.clear();

  const Design pred_design = to_design(data.predict);
  Eigen::VectorXd pred = models::predict(*used, data.predict.factor_names, pred_design.x);
  std::vector<Pick> all;
  for (std::size_t i = 0; i < data.predict.rows.size(); ++i)
    all.push_back({data.predict.rows[i].ticker, pred(Eigen::Index(i))});
  out.recommendation.trade_date = event.trade_date;
  out.recommendation.sector = data.sector;
  out.recommendation.model_used = sel.model_used;
  out.recommendation.picks = pick_top(std::move(all), opt.pick_fraction);
  out.model = *used;
  return out;
}

}  // namespace

std::vector<SectorOutcome> recommend(const RebalanceEvent& event, const std::vector<SectorData>& sectors,
                                     const RecommenderOptions& opt) {
  std::vector<std::optional<SectorOutcome>> results(sectors.size());
  if (opt.parallel && sectors.size() > 1) {
    std::vector<std::future<std::optional<SectorOutcome>>> jobs;
    for (const auto& s : sectors) jobs.push_back(std::async(std::launch::async, run_sector, std::cref(event), std::cref(s), std::cref(opt)));
    for (std::size_t k = 0; k < jobs.size(); ++k) results[k] = jobs[k].get();
  } else {
    for (std::size_t k = 0; k < sectors.size(); ++k) results[k] = run_sector(event, sectors[k], opt);
  }
  std::vector<SectorOutcome> out;
  for (auto& r : results)
    if (r) out.push_back(std::move(*r));
  std::sort(out.begin(), out.end(), [](const SectorOutcome& a, const SectorOutcome& b) {
    return a.recommendation.sector < b.recommendation.sector;
  });
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return double(inter) / double(a.size() + b.size() - inter);
}

}  // namespace dynrec
