#include "models/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "error.hpp"
#include "models/ensemble.hpp"

namespace dynrec::models {

namespace {

constexpr std::size_t kMaxFactors = 20;

const std::map<std::string, double>& default_hyperparameters(ModelFamily f) {
  static const std::map<std::string, double> none;
  static const std::map<std::string, double> ridge = {
      {"lambda", -1.0}, {"cv_folds", 5}, {"grid_min", 1e-4}, {"grid_max", 1e2}, {"grid_points", 25}};
  static const std::map<std::string, double> forest = {
      {"trees", 500}, {"mtry", 0}, {"min_leaf", 5}, {"bootstrap", 1}, {"max_depth", 0}};
  static const std::map<std::string, double> gbm = {{"stages", 1000},     {"shrinkage", 0.1},
                                                    {"depth", 3},         {"bag_fraction", 0.5},
                                                    {"min_leaf", 10},     {"cv_folds", 5}};
  switch (f) {
    case ModelFamily::kRidge: return ridge;
    case ModelFamily::kRandomForest: return forest;
    case ModelFamily::kGbm: return gbm;
    default: return none;
  }
}

bool is_whole(double v) { return std::floor(v) == v; }

}  // namespace

std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::kOls: return "ols";
    case ModelFamily::kRidge: return "ridge";
    case ModelFamily::kStepwiseAic: return "stepwise_aic";
    case ModelFamily::kRandomForest: return "random_forest";
    case ModelFamily::kGbm: return "gbm";
  }
  return "unknown";
}

std::optional<ModelFamily> family_from_name(std::string_view name) {
  for (auto f : kAllFamilies)
    if (family_name(f) == name) return f;
  if (name == "linear") return ModelFamily::kOls;
  if (name == "step" || name == "stepwise") return ModelFamily::kStepwiseAic;
  if (name == "rf") return ModelFamily::kRandomForest;
  return std::nullopt;
}

bool is_linear(ModelFamily f) {
  return f == ModelFamily::kOls || f == ModelFamily::kRidge || f == ModelFamily::kStepwiseAic;
}

ModelSpec ModelSpec::defaults(ModelFamily family, std::uint64_t seed) {
  return ModelSpec{family, default_hyperparameters(family), seed};
}

double ModelSpec::get(const std::string& key) const {
  auto it = hyperparameters.find(key);
  if (it != hyperparameters.end()) return it->second;
  const auto& d = default_hyperparameters(family);
  auto dit = d.find(key);
  if (dit == d.end())
    fail(ErrorKind::kInvalidArgument,
         std::string(family_name(family)) + " has no hyperparameter '" + key + "'");
  return dit->second;
}

ModelSpec ModelSpec::with(const std::string& key, double value) const {
  ModelSpec s = *this;
  s.hyperparameters[key] = value;
  return s;
}

void ModelSpec::validate() const {
  const auto& d = default_hyperparameters(family);
  const std::string fam(family_name(family));
  for (const auto& [k, v] : hyperparameters) {
    if (!d.count(k)) fail(ErrorKind::kInvalidArgument, fam + ": unknown hyperparameter '" + k + "'");
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, fam + ": " + k + " must be finite");
  }
  auto bad = [&](const std::string& k, const std::string& why) {
    fail(ErrorKind::kInvalidArgument, fam + ": " + k + " " + why);
  };
  switch (family) {
    case ModelFamily::kRidge:
      if (get("cv_folds") < 2 || !is_whole(get("cv_folds"))) bad("cv_folds", "must be an integer >= 2");
      if (!(get("grid_min") > 0) || !(get("grid_max") >= get("grid_min"))) bad("grid_min/grid_max", "must satisfy 0 < min <= max");
      if (get("grid_points") < 1 || !is_whole(get("grid_points"))) bad("grid_points", "must be an integer >= 1");
      break;
    case ModelFamily::kRandomForest:
      if (get("trees") < 1 || !is_whole(get("trees"))) bad("trees", "must be an integer >= 1");
      if (get("mtry") < 0 || !is_whole(get("mtry"))) bad("mtry", "must be a nonnegative integer");
      if (!(get("min_leaf") >= 1)) bad("min_leaf", "must be >= 1");
      if (get("max_depth") < 0 || !is_whole(get("max_depth"))) bad("max_depth", "must be a nonnegative integer");
      break;
    case ModelFamily::kGbm:
      if (get("stages") < 1 || !is_whole(get("stages"))) bad("stages", "must be an integer >= 1");
      if (!(get("shrinkage") > 0 && get("shrinkage") <= 1)) bad("shrinkage", "must be in (0, 1]");
      if (get("depth") < 1 || !is_whole(get("depth"))) bad("depth", "must be an integer >= 1");
      if (!(get("bag_fraction") > 0 && get("bag_fraction") <= 1)) bad("bag_fraction", "must be in (0, 1]");
      if (!(get("min_leaf") >= 1)) bad("min_leaf", "must be >= 1");
      if (get("cv_folds") < 0 || !is_whole(get("cv_folds"))) bad("cv_folds", "must be a nonnegative integer");
      break;
    default:
      break;
  }
}

FittedModel fit(const ModelSpec& spec, const std::vector<std::string>& names,
                const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  spec.validate();
  const std::string fam(family_name(spec.family));
  if (std::size_t(x.cols()) != names.size())
    fail(ErrorKind::kInvalidArgument, fam + ": " + std::to_string(x.cols()) + " columns but " +
                                          std::to_string(names.size()) + " factor names");
  if (names.size() > kMaxFactors)
    fail(ErrorKind::kInvalidArgument, fam + ": at most 20 factors supported");
  if (x.rows() != y.size() || x.rows() == 0)
    fail(ErrorKind::kInvalidArgument, fam + ": x and y row counts differ or are empty");
  if (!x.allFinite() || !y.allFinite())
    fail(ErrorKind::kInvalidArgument, fam + ": design or target contains missing/non-finite cells");

  FittedModel m;
  m.spec = spec;
  m.factor_names = names;
  m.n_rows = std::size_t(x.rows());
  const auto p = names.size();

  if (is_linear(spec.family)) {
    LinearParams lp;
    switch (spec.family) {
      case ModelFamily::kOls: lp = fit_ols(x, y, names); break;
      case ModelFamily::kRidge: lp = fit_ridge_cv(x, y, names, spec); break;
      default: lp = fit_stepwise_aic(x, y, names); break;
    }
    m.importances.assign(p, 0.0);
    for (std::size_t t = 0; t < lp.terms.size(); ++t) {
      auto it = std::find(names.begin(), names.end(), lp.terms[t]);
      m.importances[std::size_t(it - names.begin())] = lp.coefficients[t];
    }
    m.params = std::move(lp);
  } else {
    std::vector<double> imp;
    EnsembleParams ep;
    if (spec.family == ModelFamily::kRandomForest) {
      ForestOptions fo;
      fo.trees = std::size_t(spec.get("trees"));
      fo.mtry = std::size_t(spec.get("mtry"));
      fo.min_leaf = spec.get("min_leaf");
      fo.bootstrap = spec.get("bootstrap") != 0.0;
      fo.max_depth = int(spec.get("max_depth"));
      ep = fit_random_forest(x, y, fo, spec.seed, imp);
    } else {
      GbmOptions go;
      go.stages = std::size_t(spec.get("stages"));
      go.shrinkage = spec.get("shrinkage");
      go.depth = int(spec.get("depth"));
      go.bag_fraction = spec.get("bag_fraction");
      go.min_leaf = spec.get("min_leaf");
      go.cv_folds = std::size_t(spec.get("cv_folds"));
      ep = fit_gbm(x, y, go, spec.seed, imp);
    }
    double total = 0.0;
    for (double v : imp) total += v;
    m.importances.assign(p, 0.0);
    if (total > 0.0)
      for (std::size_t j = 0; j < p; ++j) m.importances[j] = 100.0 * imp[j] / total;
    m.params = std::move(ep);
  }

  Eigen::VectorXd fitted = predict(m, names, x);
  const double rss = (fitted - y).squaredNorm();
  if (const auto* lp = m.linear()) {
    const double dof = double(x.rows()) - double(lp->terms.size() + 1);
    m.residual_variance = dof > 0 ? rss / dof : 0.0;
  } else {
    m.residual_variance = rss / double(x.rows());
  }
  return m;
}

Eigen::VectorXd predict(const FittedModel& m, const std::vector<std::string>& names,
                        const Eigen::MatrixXd& x) {
  if (names != m.factor_names) {
    std::set<std::string> have(names.begin(), names.end()), want(m.factor_names.begin(), m.factor_names.end());
    std::string missing, extra;
    for (const auto& w : want)
      if (!have.count(w)) missing += (missing.empty() ? "" : ",") + w;
    for (const auto& h : have)
      if (!want.count(h)) extra += (extra.empty() ? "" : ",") + h;
    fail(ErrorKind::kInvalidArgument, "predict: factor columns do not match training (missing: [" + missing +
                                          "], extra: [" + extra + "]" +
                                          (missing.empty() && extra.empty() ? ", order differs" : "") + ")");
  }
  if (std::size_t(x.cols()) != names.size())
    fail(ErrorKind::kInvalidArgument, "predict: column count does not match factor names");
  Eigen::VectorXd out(x.rows());
  if (const auto* lp = m.linear()) {
    std::vector<std::size_t> cols;
    for (const auto& t : lp->terms)
      cols.push_back(std::size_t(std::find(names.begin(), names.end(), t) - names.begin()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double v = lp->intercept;
      for (std::size_t t = 0; t < cols.size(); ++t) v += lp->coefficients[t] * x(i, Eigen::Index(cols[t]));
      out(i) = v;
    }
  } else {
    const auto& ep = *m.ensemble();
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_ensemble(ep, x, i);
  }
  return out;
}

double mse(std::span<const double> predicted, std::span<const double> realized) {
  if (predicted.size() != realized.size())
    fail(ErrorKind::kInvalidArgument, "mse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                                          std::to_string(realized.size()) + ")");
  if (predicted.empty()) fail(ErrorKind::kInvalidArgument, "mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - realized[i];
    acc += d * d;
  }
  return acc / double(predicted.size());
}

double mse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& realized) {
  return mse(std::span<const double>(predicted.data(), std::size_t(predicted.size())),
             std::span<const double>(realized.data(), std::size_t(realized.size())));
}

std::vector<InspectEntry> inspect(const FittedModel& m) {
  std::vector<InspectEntry> out;
  if (const auto* lp = m.linear()) {
    out.push_back({"(Intercept)", lp->intercept});
    for (std::size_t t = 0; t < lp->terms.size(); ++t) out.push_back({lp->terms[t], lp->coefficients[t]});
  } else {
    for (std::size_t j = 0; j < m.factor_names.size(); ++j) out.push_back({m.factor_names[j], m.importances[j]});
  }
  std::stable_sort(out.begin(), out.end(), [](const InspectEntry& a, const InspectEntry& b) { return a.value > b.value; });
  return out;
}

nlohmann::json dump_model(const FittedModel& m) {
  nlohmann::json j;
  j["family"] = family_name(m.spec.family);
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [k, v] : default_hyperparameters(m.spec.family)) hp[k] = m.spec.get(k);
  j["hyperparameters"] = hp;
  j["seed"] = m.spec.seed;
  j["factors"] = m.factor_names;
  j["n_rows"] = m.n_rows;
  j["residual_variance"] = m.residual_variance;
  if (const auto* lp = m.linear()) {
    nlohmann::json coef = nlohmann::json::object();
    coef["(Intercept)"] = lp->intercept;
    for (std::size_t t = 0; t < lp->terms.size(); ++t) coef[lp->terms[t]] = lp->coefficients[t];
    j["coefficients"] = coef;
    if (m.spec.family == ModelFamily::kRidge) j["lambda"] = lp->lambda;
    if (m.spec.family == ModelFamily::kStepwiseAic) {
      j["aic_path"] = lp->aic_path;
      j["steps"] = lp->step_log;
    }
  } else {
    const auto& ep = *m.ensemble();
    std::size_t leaves = 0;
    int depth = 0;
    for (const auto& t : ep.trees) {
      leaves += t.leaf_count();
      depth = std::max(depth, t.depth());
    }
    j["ensemble"] = {{"trees", ep.trees.size()},
                     {"total_leaves", leaves},
                     {"max_depth", depth},
                     {"base", ep.base},
                     {"scale", ep.average ? 1.0 / double(ep.trees.size()) : ep.scale}};
  }
  nlohmann::json imp = nlohmann::json::object();
  for (const auto& e : inspect(m)) imp[e.name] = e.value;
  j["inspect"] = imp;
  return j;
}

}  // namespace dynrec::models
