#include "models/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "rng.hpp"

namespace dynrec::models {

namespace {

double exact_mean(const Eigen::VectorXd& y) {
  const double anchor = y(0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += y(i) - anchor;
  return anchor + acc / double(y.size());
}

}  // namespace

EnsembleParams fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const ForestOptions& opt, std::uint64_t seed,
                                 std::vector<double>& importance) {
  const auto n = std::size_t(x.rows());
  const auto p = std::size_t(x.cols());
  if (n < 2) fail(ErrorKind::kInvalidArgument, "random_forest needs at least 2 rows");
  if (opt.trees == 0) fail(ErrorKind::kInvalidArgument, "random_forest needs at least one tree");
  PresortedDesign design(x);
  std::vector<double> target(y.data(), y.data() + n);
  TreeOptions topt;
  topt.max_depth = opt.max_depth;
  topt.min_leaf = opt.min_leaf;
  topt.mtry = opt.mtry > 0 ? opt.mtry : std::max<std::size_t>(1, p / 3);

  EnsembleParams ep;
  ep.base = 0.0;
  ep.average = true;
  importance.assign(p, 0.0);
  std::vector<double> weights(n);
  for (std::size_t t = 0; t < opt.trees; ++t) {
    Rng rng(derive_seed(seed, 0x464f52ULL, t));
    if (opt.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) weights[rng.index(n)] += 1.0;
    } else {
      std::fill(weights.begin(), weights.end(), 1.0);
    }
    ep.trees.push_back(grow_tree(design, target, weights, topt, rng.next(), importance));
  }
  for (auto& v : importance) v /= double(opt.trees);
  return ep;
}

namespace {

/// Boosting on rows `rows` of x; if `staged_eval` is given, accumulates per-stage squared
/// error on the held-out rows.
EnsembleParams boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbmOptions& opt,
                     std::size_t stages, std::uint64_t seed, std::vector<double>& importance,
                     const Eigen::MatrixXd* eval_x, const Eigen::VectorXd* eval_y,
                     std::vector<double>* staged_sse) {
  const auto n = std::size_t(x.rows());
  PresortedDesign design(x);
  TreeOptions topt;
  topt.max_depth = opt.depth;
  topt.min_leaf = opt.min_leaf;
  topt.mtry = 0;

  EnsembleParams ep;
  ep.base = exact_mean(y);
  ep.scale = opt.shrinkage;
  Eigen::VectorXd f = Eigen::VectorXd::Constant(Eigen::Index(n), ep.base);
  Eigen::VectorXd fe;
  if (eval_x) fe = Eigen::VectorXd::Constant(eval_x->rows(), ep.base);
  importance.assign(std::size_t(x.cols()), 0.0);

  const auto bag = std::max<std::size_t>(1, std::size_t(std::floor(opt.bag_fraction * double(n))));
  std::vector<double> resid(n), weights(n);
  for (std::size_t m = 0; m < stages; ++m) {
    Rng rng(derive_seed(seed, 0x47424dULL, m));
    for (std::size_t i = 0; i < n; ++i) resid[i] = y(Eigen::Index(i)) - f(Eigen::Index(i));
    if (bag >= n) {
      std::fill(weights.begin(), weights.end(), 1.0);
    } else {
      std::fill(weights.begin(), weights.end(), 0.0);
      for (auto i : rng.sample_without_replacement(n, bag)) weights[i] = 1.0;
    }
    RegressionTree tree = grow_tree(design, resid, weights, topt, rng.next(), importance);
    for (std::size_t i = 0; i < n; ++i) f(Eigen::Index(i)) += opt.shrinkage * tree.predict_row(x, Eigen::Index(i));
    if (eval_x) {
      for (Eigen::Index i = 0; i < eval_x->rows(); ++i) fe(i) += opt.shrinkage * tree.predict_row(*eval_x, i);
      (*staged_sse)[m] += (fe - *eval_y).squaredNorm();
    }
    ep.trees.push_back(std::move(tree));
  }
  return ep;
}

}  // namespace

EnsembleParams fit_gbm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbmOptions& opt,
                       std::uint64_t seed, std::vector<double>& importance) {
  const auto n = std::size_t(x.rows());
  if (n < 2) fail(ErrorKind::kInvalidArgument, "gbm needs at least 2 rows");
  std::size_t stages = opt.stages;
  std::vector<double> cv_curve;
  if (opt.cv_folds >= 2 && n >= 2 * opt.cv_folds) {
    Rng rng(derive_seed(seed, 0x4356ULL));
    auto perm = rng.sample_without_replacement(n, n);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % opt.cv_folds;
    std::vector<double> sse(opt.stages, 0.0);
    for (std::size_t fold = 0; fold < opt.cv_folds; ++fold) {
      std::vector<Eigen::Index> tr, va;
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == fold ? va : tr).push_back(Eigen::Index(i));
      Eigen::MatrixXd xt = x(tr, Eigen::all), xv = x(va, Eigen::all);
      Eigen::VectorXd yt = y(tr), yv = y(va);
      std::vector<double> scratch;
      boost(xt, yt, opt, opt.stages, derive_seed(seed, 0x464f4c44ULL, fold), scratch, &xv, &yv, &sse);
    }
    cv_curve.resize(opt.stages);
    std::size_t best = 0;
    for (std::size_t m = 0; m < opt.stages; ++m) {
      cv_curve[m] = sse[m] / double(n);
      if (cv_curve[m] < cv_curve[best]) best = m;
    }
    stages = best + 1;
  }
  EnsembleParams ep = boost(x, y, opt, stages, seed, importance, nullptr, nullptr, nullptr);
  ep.cv_curve = std::move(cv_curve);
  return ep;
}

double predict_ensemble(const EnsembleParams& ep, const Eigen::MatrixXd& x, Eigen::Index row) {
  if (ep.average) {
    // anchored mean: exact when every tree agrees
    const double first = ep.trees.front().predict_row(x, row);
    double acc = 0.0;
    for (std::size_t t = 1; t < ep.trees.size(); ++t) acc += ep.trees[t].predict_row(x, row) - first;
    return first + acc / double(ep.trees.size());
  }
  double acc = 0.0;
  for (const auto& t : ep.trees) acc += t.predict_row(x, row);
  return ep.base + ep.scale * acc;
}

}  // namespace dynrec::models
