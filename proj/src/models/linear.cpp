#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "models/models.hpp"
#include "rng.hpp"

namespace dynrec::models {

namespace {

constexpr double kRankTolerance = 1e-10;

/// Columns centered and scaled to unit population variance; zero-variance columns keep sd = 0.
struct Standardized {
  Eigen::VectorXd mean, sd;
  Eigen::MatrixXd z;
  double y_mean = 0.0;
  Eigen::VectorXd yc;
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Standardized s;
  const double n = double(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.z = x.rowwise() - s.mean.transpose();
  s.sd = (s.z.colwise().squaredNorm() / n).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (s.sd(j) > 0.0) s.z.col(j) /= s.sd(j);
    else s.z.col(j).setZero();
  }
  s.y_mean = y.mean();
  s.yc = y.array() - s.y_mean;
  return s;
}

LinearParams to_original_scale(const Standardized& s, const Eigen::VectorXd& b,
                               const std::vector<std::string>& names) {
  LinearParams lp;
  lp.terms = names;
  lp.intercept = s.y_mean;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double beta = s.sd(j) > 0.0 ? b(j) / s.sd(j) : 0.0;
    lp.coefficients.push_back(beta);
    lp.standardized.push_back(b(j));
    lp.intercept -= beta * s.mean(j);
  }
  return lp;
}

void require_rows(std::size_t n, std::size_t p, std::string_view family) {
  if (n <= p)
    fail(ErrorKind::kInvalidArgument, std::string(family) + " needs more rows than factors: n = " +
                                          std::to_string(n) + ", requires at least " + std::to_string(p + 1));
}

}  // namespace

double aic(double rss, std::size_t n, std::size_t k) {
  const double floor_rss = std::max(rss, std::numeric_limits<double>::min());
  return double(n) * std::log(floor_rss / double(n)) + 2.0 * double(k);
}

LinearParams fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const std::vector<std::string>& names) {
  require_rows(std::size_t(x.rows()), std::size_t(x.cols()), "ols");
  Standardized s = standardize(x, y);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (!(s.sd(j) > 0.0))
      fail(ErrorKind::kNumerical, "ols: rank-deficient design (factor " + names[std::size_t(j)] +
                                      " is constant); use ridge");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.z);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < x.cols())
    fail(ErrorKind::kNumerical, "ols: rank-deficient design (rank " + std::to_string(qr.rank()) + " of " +
                                    std::to_string(x.cols()) + "); use ridge");
  Eigen::VectorXd b = qr.solve(s.yc);
  LinearParams lp = to_original_scale(s, b, names);
  lp.standardized.clear();
  return lp;
}

LinearParams fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<std::string>& names, double lambda) {
  if (x.rows() < 2) fail(ErrorKind::kInvalidArgument, "ridge needs at least 2 rows");
  if (!(lambda >= 0.0)) fail(ErrorKind::kInvalidArgument, "ridge lambda must be nonnegative");
  Standardized s = standardize(x, y);
  const double n = double(x.rows());
  // Penalized least squares on the standardized scale: (Z'Z + n lambda I) b = Z'y.
  Eigen::MatrixXd a = s.z.transpose() * s.z;
  a.diagonal().array() += n * lambda;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (!(s.sd(j) > 0.0)) a(j, j) = 1.0;  // constant column: decoupled, coefficient 0
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::kNumerical, "ridge: normal equations are singular at lambda = " + std::to_string(lambda));
  Eigen::VectorXd b = llt.solve(s.z.transpose() * s.yc);
  LinearParams lp = to_original_scale(s, b, names);
  lp.lambda = lambda;
  return lp;
}

LinearParams fit_ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const std::vector<std::string>& names, const ModelSpec& spec) {
  const double fixed = spec.get("lambda");
  if (fixed >= 0.0) return fit_ridge(x, y, names, fixed);

  const auto n = std::size_t(x.rows());
  const auto folds = std::size_t(spec.get("cv_folds"));
  const auto points = std::size_t(spec.get("grid_points"));
  const double lo = std::log(spec.get("grid_min")), hi = std::log(spec.get("grid_max"));
  std::vector<double> grid(points);
  for (std::size_t g = 0; g < points; ++g)
    grid[g] = std::exp(points == 1 ? lo : lo + (hi - lo) * double(g) / double(points - 1));

  if (n < 2 * folds) {
    // Too few rows for the folds; fall back to the middle of the grid.
    return fit_ridge(x, y, names, grid[points / 2]);
  }

  Rng rng(derive_seed(spec.seed, 0x52494447ULL));
  auto perm = rng.sample_without_replacement(n, n);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;

  std::vector<double> cv(points, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, va;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? va : tr).push_back(Eigen::Index(i));
    Eigen::MatrixXd xt = x(tr, Eigen::all);
    Eigen::VectorXd yt = y(tr);
    Eigen::MatrixXd xv = x(va, Eigen::all);
    Eigen::VectorXd yv = y(va);
    Standardized s = standardize(xt, yt);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.z.transpose() * s.z);
    const Eigen::VectorXd zy = eig.eigenvectors().transpose() * (s.z.transpose() * s.yc);
    const double nt = double(xt.rows());
    for (std::size_t g = 0; g < points; ++g) {
      Eigen::VectorXd d = eig.eigenvalues().array() + nt * grid[g];
      Eigen::VectorXd b = eig.eigenvectors() * zy.cwiseQuotient(d);
      LinearParams lp = to_original_scale(s, b, names);
      Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(lp.coefficients.data(), Eigen::Index(lp.coefficients.size()));
      Eigen::VectorXd pred = (xv * beta).array() + lp.intercept;
      cv[g] += (pred - yv).squaredNorm() / double(n);
    }
  }
  // Lowest CV error; ties go to the larger penalty.
  std::size_t best = 0;
  for (std::size_t g = 1; g < points; ++g)
    if (cv[g] <= cv[best]) best = g;
  LinearParams lp = fit_ridge(x, y, names, grid[best]);
  for (std::size_t g = 0; g < points; ++g) lp.cv_curve.emplace_back(grid[g], cv[g]);
  return lp;
}

std::optional<double> subset_rss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::size_t>& columns) {
  Standardized s = standardize(x, y);
  if (columns.empty()) return s.yc.squaredNorm();
  Eigen::MatrixXd z(x.rows(), Eigen::Index(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!(s.sd(Eigen::Index(columns[c])) > 0.0)) return std::nullopt;
    z.col(Eigen::Index(c)) = s.z.col(Eigen::Index(columns[c]));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < z.cols()) return std::nullopt;
  Eigen::VectorXd b = qr.solve(s.yc);
  return (s.yc - z * b).squaredNorm();
}

namespace {

struct StepResult {
  std::vector<std::size_t> included;
  std::vector<double> aic_path;
  std::vector<std::string> log;
};

/// Bidirectional search: each step takes the single drop or add with the lowest AIC
/// (drops before adds, then lowest column index on ties) while it strictly improves.
StepResult stepwise_search(const Eigen::MatrixXd& z, const Eigen::VectorXd& yc, std::vector<char> in,
                           const std::vector<std::string>& names) {
  const auto n = std::size_t(z.rows());
  const auto p = std::size_t(z.cols());
  auto rss_of = [&](const std::vector<char>& mask) -> std::optional<double> {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < p; ++j)
      if (mask[j]) cols.push_back(Eigen::Index(j));
    if (cols.empty()) return yc.squaredNorm();
    if (cols.size() >= n) return std::nullopt;
    Eigen::MatrixXd sub = z(Eigen::all, cols);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < sub.cols()) return std::nullopt;
    return (yc - sub * qr.solve(yc)).squaredNorm();
  };
  auto count = [](const std::vector<char>& m) { return std::size_t(std::count(m.begin(), m.end(), 1)); };

  StepResult res;
  auto start = rss_of(in);
  if (!start) fail(ErrorKind::kNumerical, "stepwise: rank-deficient starting model; use ridge");
  double current = aic(*start, n, count(in) + 1);
  res.aic_path.push_back(current);
  for (std::size_t step = 0; step < 10 * p + 10; ++step) {
    double best = current;
    int best_j = -1;
    for (int pass = 0; pass < 2; ++pass) {  // 0: drops, 1: adds
      for (std::size_t j = 0; j < p; ++j) {
        if (bool(in[j]) != (pass == 0)) continue;
        in[j] = !in[j];
        auto rss = rss_of(in);
        if (rss) {
          double a = aic(*rss, n, count(in) + 1);
          if (a < best) {
            best = a;
            best_j = int(j);
          }
        }
        in[j] = !in[j];
      }
    }
    if (best_j < 0) break;
    const auto j = std::size_t(best_j);
    res.log.push_back((in[j] ? "-" : "+") + names[j]);
    in[j] = !in[j];
    current = best;
    res.aic_path.push_back(current);
  }
  for (std::size_t j = 0; j < p; ++j)
    if (in[j]) res.included.push_back(j);
  return res;
}

}  // namespace

LinearParams fit_stepwise_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const std::vector<std::string>& names) {
  const auto p = std::size_t(x.cols());
  require_rows(std::size_t(x.rows()), p, "stepwise_aic");
  Standardized s = standardize(x, y);
  std::vector<char> full(p, 1);
  for (std::size_t j = 0; j < p; ++j)
    if (!(s.sd(Eigen::Index(j)) > 0.0))
      fail(ErrorKind::kNumerical, "stepwise: factor " + names[j] + " is constant; use ridge");
  StepResult res = stepwise_search(s.z, s.yc, full, names);
  // A greedy path from the full model can stall above the intercept-only model; search from
  // the empty model as well and keep whichever ends lower.
  const double empty_aic = aic(s.yc.squaredNorm(), std::size_t(x.rows()), 1);
  if (res.aic_path.back() > empty_aic) {
    StepResult alt = stepwise_search(s.z, s.yc, std::vector<char>(p, 0), names);
    if (alt.aic_path.back() < res.aic_path.back()) {
      res.included = std::move(alt.included);
      res.log.push_back("restart from intercept-only");
      res.log.insert(res.log.end(), alt.log.begin(), alt.log.end());
      res.aic_path.insert(res.aic_path.end(), alt.aic_path.begin(), alt.aic_path.end());
    }
  }

  LinearParams lp;
  if (res.included.empty()) {
    lp.intercept = s.y_mean;
  } else {
    std::vector<Eigen::Index> cols(res.included.begin(), res.included.end());
    std::vector<std::string> kept;
    for (auto j : res.included) kept.push_back(names[j]);
    Eigen::MatrixXd sub = x(Eigen::all, cols);
    lp = fit_ols(sub, y, kept);
  }
  lp.aic_path = std::move(res.aic_path);
  lp.step_log = std::move(res.log);
  return lp;
}

}  // namespace dynrec::models
